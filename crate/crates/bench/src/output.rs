//! CSV emission. Every file ends in a `# config_hash=… master_seed=…` line.

use std::io::Write;
use std::path::Path;

use crate::error::{BenchError, Result};

pub use qapcore::fmt::fmt9;

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn to_csv(&self, config_hash: &str, master_seed: u64) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        let mut bytes = w.into_inner().map_err(|e| BenchError::io("<buffer>", e.into_error()))?;
        writeln!(bytes, "# config_hash={config_hash} master_seed={master_seed}").expect("write to vec");
        Ok(String::from_utf8(bytes).expect("utf-8 csv"))
    }

    pub fn write(&self, path: &Path, config_hash: &str, master_seed: u64) -> Result<()> {
        let text = self.to_csv(config_hash, master_seed)?;
        std::fs::write(path, text).map_err(|e| BenchError::io(path, e))
    }
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("record serializes");
    std::fs::write(path, text + "\n").map_err(|e| BenchError::io(path, e))
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))
}
