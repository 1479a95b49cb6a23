use std::fs::File;
use std::path::Path;

use dp_hotelling::numlin::Matrix;

/// Reads an observation-per-row CSV file into an n×d matrix.
///
/// A first row with no numeric field is taken as a header; a first row
/// mixing numbers and text is an error. Fields are trimmed; every row must have the same number of columns and
/// every value must be a finite number.
pub fn read_data(path: &Path) -> Result<Matrix, String> {
    let file = File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_data(file).map_err(|e| format!("{}: {e}", path.display()))
}

pub fn parse_data<R: std::io::Read>(reader: R) -> Result<Matrix, String> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(None)
        .from_reader(reader);

    let mut width = None;
    let mut values = Vec::new();
    let mut rows = 0;
    for (line, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| format!("malformed CSV: {e}"))?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: Vec<Option<f64>> = record
            .iter()
            .map(|f| f.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect();
        if line == 0 && record.iter().all(|f| f.parse::<f64>().is_err()) {
            width = Some(record.len());
            continue;
        }
        let w = *width.get_or_insert(record.len());
        if record.len() != w {
            return Err(format!(
                "line {}: expected {w} columns, found {}",
                line + 1,
                record.len()
            ));
        }
        for (col, (v, raw)) in parsed.iter().zip(record.iter()).enumerate() {
            match v {
                Some(x) => values.push(*x),
                None => {
                    return Err(format!(
                        "line {}, column {}: '{raw}' is not a finite number",
                        line + 1,
                        col + 1
                    ))
                }
            }
        }
        rows += 1;
    }
    let cols = width.unwrap_or(0);
    if rows == 0 || cols == 0 {
        return Err("no observations found".to_string());
    }
    Matrix::from_vec(rows, cols, values).map_err(|e| e.to_string())
}
