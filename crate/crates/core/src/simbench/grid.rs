use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::design::{generate, DesignSpec};
use crate::decision::{run_test, TestConfig, ThresholdKind, DEFAULT_BOOTSTRAP_B};
use crate::mechanisms::{compute_summary, ed_covariance, BoundPolicy};
use crate::randkit::RngStream;
use crate::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 0.05;

/// One cell of a rejection-rate table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub spec: DesignSpec,
    /// Total budget; infinite means no privatization.
    pub eps: f64,
    /// Group size n₁ = n₂ = n.
    pub n: usize,
    pub kind: ThresholdKind,
    pub reps: usize,
    pub alpha: f64,
    pub bootstrap_b: usize,
}

impl Cell {
    pub fn new(spec: DesignSpec, eps: f64, n: usize, kind: ThresholdKind, reps: usize) -> Self {
        Self {
            spec,
            eps,
            n,
            kind,
            reps,
            alpha: DEFAULT_ALPHA,
            bootstrap_b: DEFAULT_BOOTSTRAP_B,
        }
    }

    fn config(&self) -> TestConfig {
        TestConfig::new(self.alpha, self.eps, self.spec.bound_m())
            .with_kind(self.kind)
            .with_bootstrap_b(self.bootstrap_b)
            .with_bound_policy(BoundPolicy::Reject)
    }

    /// Key of the replications this cell draws. Cells differing only in the
    /// threshold kind share it, so both rules see the same data and noise.
    fn scenario_key(&self) -> ScenarioKey {
        ScenarioKey {
            design: self.spec.design.name(),
            design_bits: design_param_bits(&self.spec),
            d: self.spec.d,
            a: self.spec.a.to_bits(),
            eps: self.eps.to_bits(),
            n: self.n,
            reps: self.reps,
            alpha: self.alpha.to_bits(),
            bootstrap_b: self.bootstrap_b,
        }
    }
}

fn design_param_bits(spec: &DesignSpec) -> (u64, u64) {
    match spec.design {
        super::Design::Toeplitz { l, b } => (l.to_bits(), b.to_bits()),
        _ => (0, 0),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct ScenarioKey {
    design: &'static str,
    design_bits: (u64, u64),
    d: usize,
    a: u64,
    eps: u64,
    n: usize,
    reps: usize,
    alpha: u64,
    bootstrap_b: usize,
}

impl ScenarioKey {
    /// Stream id derived from the scenario's parameters only, so a cell's
    /// numbers do not depend on which other cells share the grid.
    fn stream_id(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |x: u64| {
            for byte in x.to_le_bytes() {
                h ^= byte as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        for byte in self.design.bytes() {
            feed(byte as u64);
        }
        for x in [
            self.design_bits.0,
            self.design_bits.1,
            self.d as u64,
            self.a,
            self.eps,
            self.n as u64,
            self.alpha,
            self.bootstrap_b as u64,
        ] {
            feed(x);
        }
        h
    }
}

/// Per-replication stream for a scenario.
fn replication_stream(master_seed: u64, scenario: u64, rep: usize) -> RngStream {
    RngStream::new(master_seed, scenario).substream(rep as u64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub cell: Cell,
    pub rejections: usize,
    /// Rejection frequency, NaN when the cell failed.
    pub reject_rate: f64,
    /// First error met in the cell, in replication order.
    pub failure: Option<String>,
}

impl CellResult {
    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }
}

/// Outcome of one replication for both threshold kinds.
#[derive(Clone, Copy, Debug)]
struct RepOutcome {
    statistic: f64,
    chi2_threshold: f64,
    bootstrap_threshold: Option<f64>,
}

fn run_replication(cell: &Cell, need_bootstrap: bool, stream: &RngStream) -> Result<RepOutcome> {
    let mut gen_rng = stream.substream(0);
    let (x, y) = generate(&mut gen_rng, &cell.spec, cell.n, cell.n)?;
    let kind = if need_bootstrap {
        ThresholdKind::Bootstrap
    } else {
        ThresholdKind::Asymptotic
    };
    let out = run_test(&stream.substream(1), &x, &y, &cell.config().with_kind(kind))?;
    Ok(RepOutcome {
        statistic: out.statistic,
        chi2_threshold: out.diagnostics.chi2_reference,
        bootstrap_threshold: need_bootstrap.then_some(out.threshold),
    })
}

fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::invalid(format!("cannot build thread pool: {e}")))
}

/// Runs every cell and returns one result per cell, in input order.
///
/// Replications are spread over `threads` workers (0 picks the default).
/// Each replication owns a stream derived from `master_seed`, the cell's
/// scenario parameters and the replication index, so the table does not
/// depend on the thread count. Cells that differ only in threshold kind
/// are evaluated on the same replications. A failing replication marks
/// its cell as failed without stopping the grid.
pub fn run_grid(cells: &[Cell], master_seed: u64, threads: usize) -> Result<Vec<CellResult>> {
    for c in cells {
        c.spec.validate()?;
        c.config().validate()?;
        if c.reps == 0 || c.n < 2 {
            return Err(Error::invalid("cells need reps >= 1 and n >= 2"));
        }
    }

    let mut scenarios: BTreeMap<ScenarioKey, (Cell, bool)> = BTreeMap::new();
    for c in cells {
        let entry = scenarios.entry(c.scenario_key()).or_insert((*c, false));
        entry.1 |= c.kind == ThresholdKind::Bootstrap;
    }

    let pool = thread_pool(threads)?;
    let outcomes: BTreeMap<ScenarioKey, Vec<Result<RepOutcome>>> = pool.install(|| {
        scenarios
            .iter()
            .map(|(key, (cell, need_boot))| {
                let id = key.stream_id();
                let reps: Vec<Result<RepOutcome>> = (0..cell.reps)
                    .into_par_iter()
                    .map(|r| run_replication(cell, *need_boot, &replication_stream(master_seed, id, r)))
                    .collect();
                (*key, reps)
            })
            .collect()
    });

    Ok(cells
        .iter()
        .map(|c| aggregate(c, &outcomes[&c.scenario_key()]))
        .collect())
}

fn aggregate(cell: &Cell, reps: &[Result<RepOutcome>]) -> CellResult {
    let mut rejections = 0;
    let mut failure = None;
    for (i, r) in reps.iter().enumerate() {
        match r {
            Ok(o) => {
                let t = match cell.kind {
                    ThresholdKind::Asymptotic => o.chi2_threshold,
                    ThresholdKind::Bootstrap => o.bootstrap_threshold.expect("bootstrap computed"),
                };
                if o.statistic > t {
                    rejections += 1;
                }
            }
            Err(e) if failure.is_none() => failure = Some(format!("replication {i}: {e}")),
            Err(_) => {}
        }
    }
    CellResult {
        cell: *cell,
        rejections,
        reject_rate: if failure.is_some() {
            f64::NAN
        } else {
            rejections as f64 / cell.reps as f64
        },
        failure,
    }
}

/// Rejection rate of a single cell.
pub fn run_cell(cell: &Cell, master_seed: u64, threads: usize) -> Result<CellResult> {
    Ok(run_grid(std::slice::from_ref(cell), master_seed, threads)?.remove(0))
}

/// Private statistics t^DP of `reps` replications of `cell` (threshold ignored).
pub fn null_statistics(cell: &Cell, master_seed: u64, threads: usize) -> Result<Vec<f64>> {
    let key = cell.scenario_key();
    let id = key.stream_id();
    let pool = thread_pool(threads)?;
    pool.install(|| {
        (0..cell.reps)
            .into_par_iter()
            .map(|r| {
                run_replication(cell, false, &replication_stream(master_seed, id, r))
                    .map(|o| o.statistic)
            })
            .collect()
    })
}

/// Group sizes used by both tables.
pub const TABLE_NS: [usize; 4] = [100, 1_000, 10_000, 100_000];

/// Replication counts for the table grids.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridProfile {
    /// 200 replications for n = 10⁵ cells, 1000 elsewhere.
    Fast,
    /// 1000 replications everywhere.
    Full,
    /// The same count everywhere.
    Reps(usize),
}

impl GridProfile {
    fn reps_for(self, n: usize) -> usize {
        match self {
            GridProfile::Fast if n >= 100_000 => 200,
            GridProfile::Fast | GridProfile::Full => 1000,
            GridProfile::Reps(r) => r,
        }
    }
}

/// Uniform-cube null grid: 2 rules × ε ∈ {0.1, 0.5, 1, 5} × 4 group sizes ×
/// d ∈ {1, 10, 30}, 96 cells.
pub fn table1_grid(profile: GridProfile) -> Vec<Cell> {
    let mut cells = Vec::with_capacity(96);
    for kind in [ThresholdKind::Bootstrap, ThresholdKind::Asymptotic] {
        for eps in [0.1, 0.5, 1.0, 5.0] {
            for d in [1, 10, 30] {
                for n in TABLE_NS {
                    let spec = DesignSpec::uniform_cube(d, 0.0).expect("valid");
                    cells.push(Cell::new(spec, eps, n, kind, profile.reps_for(n)));
                }
            }
        }
    }
    cells
}

/// Toeplitz null grid, bootstrap rule: ε ∈ {0.1, 0.5, 1} × 4 group sizes ×
/// d ∈ {10, 30}, 24 cells.
pub fn table2_grid(profile: GridProfile) -> Vec<Cell> {
    let mut cells = Vec::with_capacity(24);
    for eps in [0.1, 0.5, 1.0] {
        for d in [10, 30] {
            for n in TABLE_NS {
                let spec = DesignSpec::toeplitz(d, 0.0).expect("valid");
                cells.push(Cell::new(spec, eps, n, ThresholdKind::Bootstrap, profile.reps_for(n)));
            }
        }
    }
    cells
}

/// Bootstrap power grid under the uniform-cube alternative a = 1:
/// ε ∈ {0.1, 0.5, 1, 5} × d ∈ {1, 10, 30} × 4 group sizes.
pub fn power_grid(profile: GridProfile) -> Vec<Cell> {
    let mut cells = Vec::with_capacity(48);
    for eps in [0.1, 0.5, 1.0, 5.0] {
        for d in [1, 10, 30] {
            for n in TABLE_NS {
                let spec = DesignSpec::uniform_cube(d, 1.0).expect("valid");
                cells.push(Cell::new(spec, eps, n, ThresholdKind::Bootstrap, profile.reps_for(n)));
            }
        }
    }
    cells
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerPoint {
    pub n: usize,
    pub frequency: f64,
    pub reps: usize,
}

/// Bootstrap rejection frequency of `spec` at each group size.
pub fn power_curve(
    spec: &DesignSpec,
    eps: f64,
    ns: &[usize],
    reps: usize,
    master_seed: u64,
    threads: usize,
) -> Result<Vec<PowerPoint>> {
    let cells: Vec<Cell> = ns
        .iter()
        .map(|&n| Cell::new(*spec, eps, n, ThresholdKind::Bootstrap, reps))
        .collect();
    run_grid(&cells, master_seed, threads)?
        .into_iter()
        .map(|r| match r.failure {
            Some(msg) => Err(Error::invalid(format!("power cell n = {} failed: {msg}", r.cell.n))),
            None => Ok(PowerPoint {
                n: r.cell.n,
                frequency: r.reject_rate,
                reps: r.cell.reps,
            }),
        })
        .collect()
}

pub const EXAMPLE_INFLATION_N: usize = 500;

/// Cells of the truncated-Gaussian inflation experiment (asymptotic rule,
/// n₁ = n₂ = 500) at ε = 4 and ε = 1.
pub fn example32_cells(reps: usize) -> Vec<Cell> {
    [4.0, 1.0]
        .into_iter()
        .map(|eps| {
            Cell::new(
                DesignSpec::truncated_gaussian(),
                eps,
                EXAMPLE_INFLATION_N,
                ThresholdKind::Asymptotic,
                reps,
            )
        })
        .collect()
}

/// Asymptotic-rule rejection frequencies at ε = 4 and ε = 1.
pub fn example32_inflation(reps: usize, master_seed: u64, threads: usize) -> Result<(f64, f64)> {
    let r = run_grid(&example32_cells(reps), master_seed, threads)?;
    if let Some(msg) = r.iter().find_map(|c| c.failure.clone()) {
        return Err(Error::invalid(msg));
    }
    Ok((r[0].reject_rate, r[1].reject_rate))
}

/// Median over `reps` draws of ‖Σ̂^DP − Σ‖_F for one sample of each size in
/// `ns` from `spec` (a is ignored).
pub fn covariance_error_medians(
    spec: &DesignSpec,
    eps: f64,
    ns: &[usize],
    reps: usize,
    master_seed: u64,
    threads: usize,
) -> Result<Vec<f64>> {
    spec.validate()?;
    let spec = DesignSpec { a: 0.0, ..*spec };
    let truth = spec.population_cov();
    let m = spec.bound_m();
    let pool = thread_pool(threads)?;
    ns.iter()
        .map(|&n| {
            let root = RngStream::new(master_seed, n as u64);
            let mut errs: Vec<f64> = pool.install(|| {
                (0..reps)
                    .into_par_iter()
                    .map(|r| {
                        let s = root.substream(r as u64);
                        let (x, _) = generate(&mut s.substream(0), &spec, n, 0)?;
                        let summary = compute_summary(&x, m, BoundPolicy::Reject)?;
                        let dp = ed_covariance(&mut s.substream(1), &summary.cov, n, m, eps / 4.0)?;
                        Ok(dp.sub(&truth)?.frobenius_norm())
                    })
                    .collect::<Result<Vec<f64>>>()
            })?;
            errs.sort_by(f64::total_cmp);
            Ok(median_sorted(&errs))
        })
        .collect()
}

fn median_sorted(v: &[f64]) -> f64 {
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_shapes() {
        assert_eq!(table1_grid(GridProfile::Fast).len(), 96);
        assert_eq!(table2_grid(GridProfile::Fast).len(), 24);
        let fast = table1_grid(GridProfile::Fast);
        assert!(fast.iter().all(|c| c.reps == if c.n == 100_000 { 200 } else { 1000 }));
        assert!(table1_grid(GridProfile::Full).iter().all(|c| c.reps == 1000));
    }

    fn small_cells() -> Vec<Cell> {
        let spec = DesignSpec::uniform_cube(2, 0.0).unwrap();
        vec![
            Cell::new(spec, 1.0, 50, ThresholdKind::Bootstrap, 24),
            Cell::new(spec, 1.0, 50, ThresholdKind::Asymptotic, 24),
            Cell::new(spec, f64::INFINITY, 50, ThresholdKind::Asymptotic, 24),
        ]
    }

    #[test]
    fn grid_is_independent_of_thread_count() {
        let cells = small_cells();
        let a = run_grid(&cells, 42, 1).unwrap();
        let b = run_grid(&cells, 42, 3).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|r| !r.failed()));
    }

    #[test]
    fn cell_result_does_not_depend_on_neighbours() {
        let cells = small_cells();
        let all = run_grid(&cells, 7, 2).unwrap();
        let alone = run_cell(&cells[1], 7, 2).unwrap();
        assert_eq!(all[1], alone);
    }

    #[test]
    fn failing_replication_marks_the_cell() {
        let cell = small_cells()[0];
        let ok = RepOutcome {
            statistic: 5.0,
            chi2_threshold: 1.0,
            bootstrap_threshold: Some(10.0),
        };
        let r = aggregate(&cell, &[Ok(ok), Err(Error::invalid("boom")), Ok(ok)]);
        assert!(r.failed() && r.reject_rate.is_nan());
        assert!(r.failure.unwrap().starts_with("replication 1"));
        let fine = aggregate(&cell, &[Ok(ok), Ok(ok)]);
        assert_eq!((fine.rejections, fine.failed()), (0, false));
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median_sorted(&[1.0, 2.0, 3.0]), 2.0);
        assert_eq!(median_sorted(&[1.0, 2.0, 3.0, 5.0]), 2.5);
    }
}
