//! Data designs and the Monte Carlo runner for rejection-rate tables,
//! power curves and the small-sample inflation experiment.

mod design;
mod grid;
mod table;

pub use design::{generate, Design, DesignSpec};
pub use grid::{
    covariance_error_medians, example32_cells, example32_inflation, null_statistics, power_curve,
    power_grid, run_cell, run_grid, table1_grid, table2_grid, Cell, CellResult, GridProfile,
    PowerPoint, DEFAULT_ALPHA, EXAMPLE_INFLATION_N, TABLE_NS,
};
pub use table::{write_power_csv, RejectionTable, TableRow, TABLE_HEADER};
