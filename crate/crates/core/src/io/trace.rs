//! Per-quantum counter traces in CSV.
//!
//! Each row holds one application's counter deltas for one quantum:
//!
//! ```text
//! quantum_index,app_id,core_id,cpu_cycles,stall_frontend,stall_backend,inst_retired,inst_spec
//! ```

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::sim::RunResult;
use crate::stack::{AppId, CounterSample};

pub const TRACE_COLUMNS: [&str; 8] = [
    "quantum_index",
    "app_id",
    "core_id",
    "cpu_cycles",
    "stall_frontend",
    "stall_backend",
    "inst_retired",
    "inst_spec",
];

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace header is missing columns: {}", .0.join(", "))]
    MissingColumns(Vec<String>),
    #[error("line {line}: {reason}")]
    Row { line: u64, reason: String },
    #[error("line {line}: duplicate row for app {app} quantum {quantum} (first seen on line {first})")]
    Duplicate {
        line: u64,
        first: u64,
        app: AppId,
        quantum: u64,
    },
    #[error("line {line}: app {app} jumps from quantum {previous} to {next}; quanta must be contiguous")]
    Gap {
        line: u64,
        app: AppId,
        previous: u64,
        next: u64,
    },
    #[error("trace is empty")]
    Empty,
    #[error("cannot access trace {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
}

/// One row of a trace file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub core_id: u32,
    pub sample: CounterSample,
}

/// Samples grouped by application, ordered by quantum.
pub type Trace = BTreeMap<AppId, Vec<CounterSample>>;

fn parse_field<T: std::str::FromStr>(
    record: &csv::StringRecord,
    col: usize,
    name: &str,
    line: u64,
) -> Result<T, TraceError> {
    let raw = record.get(col).unwrap_or("").trim();
    raw.parse().map_err(|_| TraceError::Row {
        line,
        reason: format!("{name} = {raw:?} is not a valid value"),
    })
}

fn parse_count(record: &csv::StringRecord, col: usize, name: &str, line: u64) -> Result<f64, TraceError> {
    let v: f64 = parse_field(record, col, name, line)?;
    if !v.is_finite() || v < 0.0 {
        return Err(TraceError::Row {
            line,
            reason: format!("{name} = {v} must be a finite non-negative count"),
        });
    }
    Ok(v)
}

/// Parses trace rows, reporting the first malformed row. Extra columns are
/// ignored.
pub fn read_trace_rows(reader: impl Read) -> Result<Vec<(u64, TraceRow)>, TraceError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let index: Vec<Option<usize>> = TRACE_COLUMNS
        .iter()
        .map(|c| headers.iter().position(|h| h.trim() == *c))
        .collect();
    let missing: Vec<String> = TRACE_COLUMNS
        .iter()
        .zip(&index)
        .filter(|(_, i)| i.is_none())
        .map(|(c, _)| c.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(TraceError::MissingColumns(missing));
    }
    let col: Vec<usize> = index.into_iter().flatten().collect();
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let sample = CounterSample {
            quantum_index: parse_field(&record, col[0], TRACE_COLUMNS[0], line)?,
            app_id: AppId(parse_field(&record, col[1], TRACE_COLUMNS[1], line)?),
            cpu_cycles: parse_count(&record, col[3], TRACE_COLUMNS[3], line)?,
            stall_frontend: parse_count(&record, col[4], TRACE_COLUMNS[4], line)?,
            stall_backend: parse_count(&record, col[5], TRACE_COLUMNS[5], line)?,
            inst_retired: parse_count(&record, col[6], TRACE_COLUMNS[6], line)?,
            inst_spec: parse_count(&record, col[7], TRACE_COLUMNS[7], line)?,
        };
        let core_id = parse_field(&record, col[2], TRACE_COLUMNS[2], line)?;
        rows.push((line, TraceRow { core_id, sample }));
    }
    Ok(rows)
}

/// Groups rows by application and checks keys and contiguity.
pub fn group_trace(rows: &[(u64, TraceRow)]) -> Result<Trace, TraceError> {
    if rows.is_empty() {
        return Err(TraceError::Empty);
    }
    let mut seen: BTreeMap<(AppId, u64), usize> = BTreeMap::new();
    for (k, (line, row)) in rows.iter().enumerate() {
        let key = (row.sample.app_id, row.sample.quantum_index);
        if let Some(&first) = seen.get(&key) {
            return Err(TraceError::Duplicate {
                line: *line,
                first: rows[first].0,
                app: key.0,
                quantum: key.1,
            });
        }
        seen.insert(key, k);
    }
    let mut trace = Trace::new();
    let mut previous: Option<(AppId, u64)> = None;
    for (&(app, quantum), &k) in &seen {
        let (line, row) = &rows[k];
        if let Some((p_app, p_q)) = previous {
            if p_app == app && quantum != p_q + 1 {
                return Err(TraceError::Gap {
                    line: *line,
                    app,
                    previous: p_q,
                    next: quantum,
                });
            }
        }
        previous = Some((app, quantum));
        trace.entry(app).or_default().push(row.sample);
    }
    Ok(trace)
}

pub fn read_trace(reader: impl Read) -> Result<Trace, TraceError> {
    group_trace(&read_trace_rows(reader)?)
}

pub fn load_trace(path: impl AsRef<Path>) -> Result<Trace, TraceError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| TraceError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_trace(std::io::BufReader::new(file))
}

pub fn write_trace_rows(rows: &[TraceRow], writer: impl Write) -> Result<(), TraceError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(TRACE_COLUMNS)?;
    for r in rows {
        let s = &r.sample;
        w.write_record(&[
            s.quantum_index.to_string(),
            s.app_id.0.to_string(),
            r.core_id.to_string(),
            s.cpu_cycles.to_string(),
            s.stall_frontend.to_string(),
            s.stall_backend.to_string(),
            s.inst_retired.to_string(),
            s.inst_spec.to_string(),
        ])?;
    }
    w.flush().map_err(|e| TraceError::Csv(e.into()))?;
    Ok(())
}

pub fn save_trace(rows: &[TraceRow], path: impl AsRef<Path>) -> Result<(), TraceError> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|source| TraceError::Io {
        path: path.display().to_string(),
        source,
    })?;
    write_trace_rows(rows, std::io::BufWriter::new(file))
}

/// Rows of a simulated run, quantum by quantum, with each application's
/// core taken from that quantum's schedule.
pub fn run_trace_rows(run: &RunResult) -> Vec<TraceRow> {
    run.samples
        .iter()
        .zip(&run.schedules)
        .flat_map(|(samples, schedule)| {
            samples.iter().map(move |s| TraceRow {
                core_id: schedule.core_of(s.app_id).unwrap_or(u32::MAX),
                sample: *s,
            })
        })
        .collect()
}
