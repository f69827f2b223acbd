//! CSV row schemas for sweeps and benchmarks.

use std::fs::{File, OpenOptions};
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::Result;

/// One `(cell, d)` result of a weight sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub family: String,
    pub n: usize,
    pub m: usize,
    pub instance: String,
    pub strategy: String,
    pub beta: f64,
    pub gamma: f64,
    pub restarts: usize,
    pub steps: usize,
    pub seed: u64,
    pub d: usize,
    pub l_badness: Option<f64>,
    pub comb: Option<f64>,
    pub argmin_n: Option<usize>,
    pub step_mean_secs: Option<f64>,
    pub eval_secs: Option<f64>,
    pub status: String,
}

pub const REPORT_HEADER: [&str; 17] = [
    "family",
    "n",
    "m",
    "instance",
    "strategy",
    "beta",
    "gamma",
    "restarts",
    "steps",
    "seed",
    "d",
    "l_badness",
    "comb",
    "argmin_n",
    "step_mean_secs",
    "eval_secs",
    "status",
];

/// One instance size of a scalability benchmark. Timing columns hold seconds
/// or a marker (`timeout`, `resource`, `skipped`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub n: usize,
    pub par: usize,
    pub d: usize,
    pub step_secs: f64,
    pub eval_secs: String,
    pub naive_secs: String,
}

pub const BENCH_HEADER: [&str; 6] = ["n", "par", "d", "step_secs", "eval_secs", "naive_secs"];

pub fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for row in reader.deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}

/// CSV writer appending to `path`; the header is written only when the file
/// is new or empty.
pub(crate) fn append_writer(path: &Path) -> Result<csv::Writer<File>> {
    let fresh = std::fs::metadata(path).map_or(true, |m| m.len() == 0);
    let file = OpenOptions::new().create(true).append(true).open(path)?;
    Ok(csv::WriterBuilder::new().has_headers(fresh).from_writer(file))
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
