//! Corpus file formats.
//!
//! * series: CSV with header `timestamp,value`;
//! * labels: JSON object mapping relative file paths to `[start, end]`
//!   timestamp pairs;
//! * results: CSV with header `timestamp,value,anomaly_likelihood,p_value`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::conformal::DetectionRecord;
use crate::embedding::{SeriesPoint, Timestamp};
use crate::error::{Error, Result};

use super::AnomalyWindow;

pub const RESULTS_HEADER: &str = "timestamp,value,anomaly_likelihood,p_value";

pub fn load_series(path: impl AsRef<Path>) -> Result<Vec<SeriesPoint>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_series(file)
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

fn check_header(reader: &mut csv::Reader<impl Read>, expected: &[&str]) -> Result<()> {
    let headers = reader.headers().map_err(csv_error)?;
    let got: Vec<&str> = headers.iter().map(str::trim).collect();
    if got != expected {
        return Err(Error::Parse {
            line: 1,
            message: format!(
                "expected header {:?}, found {:?}",
                expected.join(","),
                got.join(",")
            ),
        });
    }
    Ok(())
}

fn parse_timestamp(text: &str, line: usize) -> Result<Timestamp> {
    Timestamp::parse(text).ok_or_else(|| Error::Parse {
        line,
        message: format!("unrecognised timestamp {text:?}"),
    })
}

fn parse_number(text: &str, line: usize, what: &str) -> Result<f64> {
    let text = text.trim();
    if text.is_empty() {
        return Err(Error::MissingValue { line });
    }
    let v: f64 = text.parse().map_err(|_| Error::Parse {
        line,
        message: format!("{what} {text:?} is not a number"),
    })?;
    if v.is_nan() {
        return Err(Error::MissingValue { line });
    }
    Ok(v)
}

/// Parses a `timestamp,value` series; timestamps must increase strictly.
pub fn parse_series(input: impl Read) -> Result<Vec<SeriesPoint>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(input);
    check_header(&mut reader, &["timestamp", "value"])?;
    let mut out: Vec<SeriesPoint> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != 2 {
            return Err(Error::Parse {
                line,
                message: format!("expected 2 fields, found {}", record.len()),
            });
        }
        let timestamp = parse_timestamp(&record[0], line)?;
        let value = parse_number(&record[1], line, "value")?;
        if !value.is_finite() {
            return Err(Error::MissingValue { line });
        }
        if out.last().is_some_and(|p| p.timestamp >= timestamp) {
            return Err(Error::NonMonotoneTimestamps { line });
        }
        out.push(SeriesPoint { timestamp, value });
    }
    Ok(out)
}

pub fn load_windows(path: impl AsRef<Path>) -> Result<BTreeMap<String, Vec<AnomalyWindow>>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_windows(&text)
}

/// Parses a label document, sorting each file's windows and rejecting
/// overlaps.
pub fn parse_windows(text: &str) -> Result<BTreeMap<String, Vec<AnomalyWindow>>> {
    let raw: BTreeMap<String, Vec<(String, String)>> =
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
    let mut out = BTreeMap::new();
    for (file, pairs) in raw {
        let mut windows = pairs
            .iter()
            .map(|(start, end)| {
                let w = AnomalyWindow {
                    start: parse_timestamp(start, 0)?,
                    end: parse_timestamp(end, 0)?,
                };
                if w.start > w.end {
                    return Err(Error::Parse {
                        line: 0,
                        message: format!("{file}: window [{start}, {end}] ends before it starts"),
                    });
                }
                Ok(w)
            })
            .collect::<Result<Vec<_>>>()?;
        windows.sort();
        if windows.windows(2).any(|w| w[1].start <= w[0].end) {
            return Err(Error::OverlappingWindows { file });
        }
        out.insert(file, windows);
    }
    Ok(out)
}

/// Renders windows back into the label document format.
pub fn windows_to_json(labels: &BTreeMap<String, Vec<AnomalyWindow>>) -> String {
    let doc: BTreeMap<&String, Vec<[String; 2]>> = labels
        .iter()
        .map(|(k, ws)| {
            (
                k,
                ws.iter()
                    .map(|w| [w.start.to_string(), w.end.to_string()])
                    .collect(),
            )
        })
        .collect();
    serde_json::to_string_pretty(&doc).expect("label document serializes")
}

/// One row of a results file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResultRow {
    pub timestamp: Timestamp,
    pub value: f64,
    pub likelihood: f64,
    pub p: f64,
}

impl From<&DetectionRecord> for ResultRow {
    fn from(r: &DetectionRecord) -> Self {
        Self {
            timestamp: r.timestamp,
            value: r.value,
            likelihood: r.likelihood,
            p: r.p,
        }
    }
}

pub fn write_results_to(out: &mut impl Write, rows: &[ResultRow]) -> std::io::Result<()> {
    writeln!(out, "{RESULTS_HEADER}")?;
    for r in rows {
        writeln!(out, "{},{},{},{}", r.timestamp, r.value, r.likelihood, r.p)?;
    }
    Ok(())
}

pub fn write_results(path: impl AsRef<Path>, rows: &[ResultRow]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_results_to(&mut out, rows)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn read_results(path: impl AsRef<Path>) -> Result<Vec<ResultRow>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_results(file)
}

pub fn parse_results(input: impl Read) -> Result<Vec<ResultRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    check_header(
        &mut reader,
        &["timestamp", "value", "anomaly_likelihood", "p_value"],
    )?;
    reader
        .records()
        .map(|record| {
            let record = record.map_err(csv_error)?;
            let line = record.position().map_or(0, |p| p.line() as usize);
            Ok(ResultRow {
                timestamp: parse_timestamp(&record[0], line)?,
                value: parse_number(&record[1], line, "value")?,
                likelihood: parse_number(&record[2], line, "anomaly_likelihood")?,
                p: parse_number(&record[3], line, "p_value")?,
            })
        })
        .collect()
}
