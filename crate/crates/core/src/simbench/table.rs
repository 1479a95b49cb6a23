use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::design::{Design, DesignSpec};
use super::grid::{Cell, CellResult, PowerPoint};
use crate::decision::ThresholdKind;
use crate::{Error, Result};

pub const TABLE_HEADER: [&str; 8] = ["design", "d", "eps", "n", "a", "kind", "reps", "reject_rate"];

/// One CSV row of a rejection table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub design: String,
    pub d: usize,
    /// `inf` when privatization was off.
    #[serde(with = "eps_text")]
    pub eps: f64,
    pub n: usize,
    pub a: f64,
    pub kind: ThresholdKind,
    pub reps: usize,
    /// Empty in the CSV (NaN here) when the cell failed.
    #[serde(with = "rate_text")]
    pub reject_rate: f64,
}

mod eps_text {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        let text = String::deserialize(d)?;
        match text.as_str() {
            "inf" => Ok(f64::INFINITY),
            t => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

mod rate_text {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_nan() {
            s.serialize_str("")
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        let text = String::deserialize(d)?;
        if text.is_empty() {
            Ok(f64::NAN)
        } else {
            text.parse().map_err(serde::de::Error::custom)
        }
    }
}

impl From<&CellResult> for TableRow {
    fn from(r: &CellResult) -> Self {
        Self {
            design: r.cell.spec.design.name().to_string(),
            d: r.cell.spec.d,
            eps: r.cell.eps,
            n: r.cell.n,
            a: r.cell.spec.a,
            kind: r.cell.kind,
            reps: r.cell.reps,
            reject_rate: r.reject_rate,
        }
    }
}

impl TableRow {
    /// Rebuilds the cell (with default α and B) from a parsed row.
    pub fn cell(&self) -> Result<Cell> {
        let design: Design = self.design.parse()?;
        let spec = DesignSpec::new(design, self.d, self.a)?;
        Ok(Cell::new(spec, self.eps, self.n, self.kind, self.reps))
    }
}

/// Per-cell rejection frequencies in CSV-ready form.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RejectionTable {
    pub rows: Vec<TableRow>,
    /// (row index, message) for every failed cell.
    pub failures: Vec<(usize, String)>,
}

impl RejectionTable {
    pub fn from_results(results: &[CellResult]) -> Self {
        Self {
            rows: results.iter().map(TableRow::from).collect(),
            failures: results
                .iter()
                .enumerate()
                .filter_map(|(i, r)| r.failure.clone().map(|m| (i, m)))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        out.write_record(TABLE_HEADER).map_err(csv_err)?;
        for row in &self.rows {
            out.serialize(row).map_err(csv_err)?;
        }
        out.flush().map_err(|e| Error::invalid(format!("csv write failed: {e}")))
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let header = rdr.headers().map_err(csv_err)?;
        if header.iter().ne(TABLE_HEADER.iter().copied()) {
            return Err(Error::invalid(format!(
                "unexpected rejection-table header: {header:?}"
            )));
        }
        let rows = rdr
            .deserialize()
            .collect::<std::result::Result<Vec<TableRow>, _>>()
            .map_err(csv_err)?;
        Ok(Self {
            rows,
            failures: Vec::new(),
        })
    }

    /// JSON summary: every row plus the failure messages.
    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct JsonRow<'a> {
            design: &'a str,
            d: usize,
            eps: Option<f64>,
            n: usize,
            a: f64,
            kind: ThresholdKind,
            reps: usize,
            reject_rate: Option<f64>,
        }
        #[derive(Serialize)]
        struct Summary<'a> {
            cells: Vec<JsonRow<'a>>,
            failures: Vec<FailureJson<'a>>,
        }
        #[derive(Serialize)]
        struct FailureJson<'a> {
            row: usize,
            message: &'a str,
        }
        let summary = Summary {
            cells: self
                .rows
                .iter()
                .map(|r| JsonRow {
                    design: &r.design,
                    d: r.d,
                    eps: r.eps.is_finite().then_some(r.eps),
                    n: r.n,
                    a: r.a,
                    kind: r.kind,
                    reps: r.reps,
                    reject_rate: (!r.reject_rate.is_nan()).then_some(r.reject_rate),
                })
                .collect(),
            failures: self
                .failures
                .iter()
                .map(|(row, message)| FailureJson { row: *row, message })
                .collect(),
        };
        serde_json::to_string_pretty(&summary)
            .map_err(|e| Error::invalid(format!("json encoding failed: {e}")))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::invalid(format!("csv error: {e}"))
}

/// Writes power-curve points as `n,frequency,reps`.
pub fn write_power_csv<W: Write>(points: &[PowerPoint], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for p in points {
        out.serialize(p).map_err(csv_err)?;
    }
    out.flush().map_err(|e| Error::invalid(format!("csv write failed: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_results() -> Vec<CellResult> {
        let cube = DesignSpec::uniform_cube(10, 0.0).unwrap();
        let toe = DesignSpec::toeplitz(30, 1.0).unwrap();
        vec![
            CellResult {
                cell: Cell::new(cube, 0.1, 100, ThresholdKind::Bootstrap, 1000),
                rejections: 58,
                reject_rate: 0.058,
                failure: None,
            },
            CellResult {
                cell: Cell::new(toe, f64::INFINITY, 1000, ThresholdKind::Asymptotic, 200),
                rejections: 0,
                reject_rate: f64::NAN,
                failure: Some("replication 3: stalled".into()),
            },
            CellResult {
                cell: Cell::new(cube, 1.0 / 3.0, 100_000, ThresholdKind::Asymptotic, 7),
                rejections: 1,
                reject_rate: 1.0 / 7.0,
                failure: None,
            },
        ]
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let table = RejectionTable::from_results(&sample_results());
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("design,d,eps,n,a,kind,reps,reject_rate\n"));
        assert!(text.contains("toeplitz,30,inf,1000,1.0,asymptotic,200,\n"));
        let back = RejectionTable::read_csv(&buf[..]).unwrap();
        assert_eq!(back.rows.len(), 3);
        for (a, b) in table.rows.iter().zip(&back.rows) {
            assert_eq!(a.design, b.design);
            assert_eq!((a.d, a.n, a.kind, a.reps), (b.d, b.n, b.kind, b.reps));
            assert_eq!(a.eps.to_bits(), b.eps.to_bits());
            assert_eq!(a.a.to_bits(), b.a.to_bits());
            assert!(a.reject_rate.to_bits() == b.reject_rate.to_bits() || a.reject_rate.is_nan());
        }
        assert_eq!(back.rows[2].cell().unwrap(), sample_results()[2].cell);
    }

    #[test]
    fn bad_header_is_rejected() {
        let text = "x,y\n1,2\n";
        assert!(RejectionTable::read_csv(text.as_bytes()).is_err());
    }

    #[test]
    fn json_summary_lists_failures() {
        let table = RejectionTable::from_results(&sample_results());
        let v: serde_json::Value = serde_json::from_str(&table.to_json().unwrap()).unwrap();
        assert_eq!(v["cells"].as_array().unwrap().len(), 3);
        assert!(v["cells"][1]["eps"].is_null());
        assert!(v["cells"][1]["reject_rate"].is_null());
        assert_eq!(v["failures"][0]["row"], 1);
    }
}
