//! Per-repetition results and horizontal-waste CCDF files.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const RESULT_COLUMNS: [&str; 7] = [
    "workload",
    "policy",
    "repetition",
    "turnaround_quanta",
    "tt_speedup_vs_baseline",
    "ipc_geomean",
    "discarded_flag",
];

pub const CCDF_COLUMNS: [&str; 2] = ["threshold", "probability"];

#[derive(Debug, Error)]
pub enum ResultsError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed results CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("results header must be {expected}, found {found}")]
    Header { expected: String, found: String },
}

/// One repetition of one policy on one workload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub workload: String,
    pub policy: String,
    pub repetition: u32,
    pub turnaround_quanta: f64,
    /// Mean baseline turnaround over this repetition's turnaround.
    pub tt_speedup_vs_baseline: f64,
    pub ipc_geomean: f64,
    pub discarded_flag: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CcdfRow {
    pub threshold: f64,
    pub probability: f64,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ResultsError + '_ {
    move |source| ResultsError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_rows<T: Serialize>(columns: &[&str], rows: &[T], writer: impl Write) -> Result<(), ResultsError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(columns)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

fn read_rows<T: for<'de> Deserialize<'de>>(columns: &[&str], reader: impl Read) -> Result<Vec<T>, ResultsError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?;
    if headers.iter().ne(columns.iter().copied()) {
        return Err(ResultsError::Header {
            expected: columns.join(","),
            found: headers.iter().collect::<Vec<_>>().join(","),
        });
    }
    rdr.deserialize().map(|r| r.map_err(ResultsError::from)).collect()
}

fn save_rows<T: Serialize>(columns: &[&str], rows: &[T], path: &Path) -> Result<(), ResultsError> {
    let file = std::fs::File::create(path).map_err(io_err(path))?;
    write_rows(columns, rows, std::io::BufWriter::new(file))
}

fn load_rows<T: for<'de> Deserialize<'de>>(columns: &[&str], path: &Path) -> Result<Vec<T>, ResultsError> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    read_rows(columns, std::io::BufReader::new(file))
}

pub fn write_results(rows: &[ResultRow], writer: impl Write) -> Result<(), ResultsError> {
    write_rows(&RESULT_COLUMNS, rows, writer)
}

pub fn read_results(reader: impl Read) -> Result<Vec<ResultRow>, ResultsError> {
    read_rows(&RESULT_COLUMNS, reader)
}

pub fn save_results(rows: &[ResultRow], path: impl AsRef<Path>) -> Result<(), ResultsError> {
    save_rows(&RESULT_COLUMNS, rows, path.as_ref())
}

pub fn load_results(path: impl AsRef<Path>) -> Result<Vec<ResultRow>, ResultsError> {
    load_rows(&RESULT_COLUMNS, path.as_ref())
}

pub fn ccdf_rows(points: &[(f64, f64)]) -> Vec<CcdfRow> {
    points
        .iter()
        .map(|&(threshold, probability)| CcdfRow { threshold, probability })
        .collect()
}

pub fn write_ccdf(rows: &[CcdfRow], writer: impl Write) -> Result<(), ResultsError> {
    write_rows(&CCDF_COLUMNS, rows, writer)
}

pub fn read_ccdf(reader: impl Read) -> Result<Vec<CcdfRow>, ResultsError> {
    read_rows(&CCDF_COLUMNS, reader)
}

pub fn save_ccdf(rows: &[CcdfRow], path: impl AsRef<Path>) -> Result<(), ResultsError> {
    save_rows(&CCDF_COLUMNS, rows, path.as_ref())
}

pub fn load_ccdf(path: impl AsRef<Path>) -> Result<Vec<CcdfRow>, ResultsError> {
    load_rows(&CCDF_COLUMNS, path.as_ref())
}
