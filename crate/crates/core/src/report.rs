//! Check records and their CSV / JSON serializations.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scenario::OutputFormat;

pub const CSV_COLUMNS: [&str; 8] = ["scenario_id", "check", "point_index", "point_coords", "quantity", "value", "tol", "pass"];

/// One measured quantity. `point_index` is absent for per-check aggregates
/// and `tol` is absent for informational values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Record {
    pub scenario_id: String,
    pub check: String,
    pub point_index: Option<usize>,
    pub point_coords: Option<Vec<f64>>,
    pub quantity: String,
    pub value: f64,
    pub tol: Option<f64>,
    pub pass: bool,
}

impl Record {
    fn csv_row(&self) -> [String; 8] {
        [
            self.scenario_id.clone(),
            self.check.clone(),
            self.point_index.map(|i| i.to_string()).unwrap_or_default(),
            self.point_coords.as_ref().map(|p| p.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";")).unwrap_or_default(),
            self.quantity.clone(),
            self.value.to_string(),
            self.tol.map(|t| t.to_string()).unwrap_or_default(),
            self.pass.to_string(),
        ]
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub check: String,
    pub pass: bool,
    pub wall_time_s: f64,
    /// Set when the check could not be evaluated.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub records: Vec<Record>,
}

impl CheckReport {
    pub fn failed_records(&self) -> usize {
        self.records.iter().filter(|r| !r.pass).count()
    }

    /// Largest `value / tol` over records with a positive tolerance.
    pub fn worst_ratio(&self) -> Option<f64> {
        self.records
            .iter()
            .filter_map(|r| r.tol.filter(|t| *t > 0.0).map(|t| r.value.abs() / t))
            .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))))
    }

    pub fn summary_line(&self) -> String {
        let status = if self.pass { "PASS" } else { "FAIL" };
        let mut line = format!("{status} {:<26} {:>4} records", self.check, self.records.len());
        if !self.pass {
            line.push_str(&format!(", {} failing", self.failed_records()));
        }
        if let Some(r) = self.worst_ratio() {
            line.push_str(&format!(", worst value/tol {r:.3e}"));
        }
        if let Some(e) = &self.error {
            line.push_str(&format!(", error: {e}"));
        }
        line
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioReport {
    pub scenario_id: String,
    pub schema_version: u32,
    pub geometry: String,
    pub pass: bool,
    pub wall_time_s: f64,
    pub checks: Vec<CheckReport>,
}

impl ScenarioReport {
    pub fn records(&self) -> impl Iterator<Item = &Record> {
        self.checks.iter().flat_map(|c| c.records.iter())
    }
}

pub fn write_csv<'a>(out: impl Write, records: impl IntoIterator<Item = &'a Record>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(CSV_COLUMNS).map_err(io)?;
    for r in records {
        w.write_record(r.csv_row()).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `<stem>.csv` and/or `<stem>.json` into `dir`; returns the paths.
pub fn write_reports(dir: &Path, stem: &str, reports: &[ScenarioReport], format: OutputFormat) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let mut written = Vec::new();
    if format.csv() {
        let path = dir.join(format!("{stem}.csv"));
        let file = std::fs::File::create(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        write_csv(std::io::BufWriter::new(file), reports.iter().flat_map(|r| r.records()))?;
        written.push(path);
    }
    if format.json() {
        let path = dir.join(format!("{stem}.json"));
        let body = if reports.len() == 1 {
            serde_json::to_string_pretty(&reports[0])
        } else {
            serde_json::to_string_pretty(reports)
        }
        .map_err(|e| Error::Io(e.to_string()))?;
        std::fs::write(&path, body + "\n").map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        written.push(path);
    }
    Ok(written)
}
