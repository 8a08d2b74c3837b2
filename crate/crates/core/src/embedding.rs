//! Lagged ("caterpillar") embedding of a univariate series.
//!
//! A series `x_1, ..., x_n` and a window length `L` give the trajectory
//! matrix whose column `i` is `(x_i, ..., x_{i+L-1})`. Consecutive columns
//! overlap in `L - 1` entries, so every anti-diagonal is constant. When a new
//! observation arrives the oldest column is dropped and the column ending at
//! the new point is appended.
//!
//! Timestamps only carry ordering; the embedding works on sample order.

use std::collections::VecDeque;
use std::fmt;

use chrono::NaiveDateTime;

use crate::error::{Error, Result};

const DATETIME_FORMATS: [&str; 2] = ["%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M:%S%.f"];

/// Ordered time tag of an observation.
///
/// Either a plain integer index or a calendar timestamp as found in the
/// benchmark CSV files (`2014-04-01 00:00:00`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Timestamp {
    Index(i64),
    DateTime(NaiveDateTime),
}

impl Timestamp {
    pub fn parse(text: &str) -> Option<Self> {
        let text = text.trim();
        if let Ok(i) = text.parse::<i64>() {
            return Some(Timestamp::Index(i));
        }
        DATETIME_FORMATS
            .iter()
            .find_map(|fmt| NaiveDateTime::parse_from_str(text, fmt).ok())
            .map(Timestamp::DateTime)
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Timestamp::Index(i) => write!(f, "{i}"),
            Timestamp::DateTime(dt) => write!(f, "{}", dt.format("%Y-%m-%d %H:%M:%S%.f")),
        }
    }
}

impl From<i64> for Timestamp {
    fn from(i: i64) -> Self {
        Timestamp::Index(i)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesPoint {
    pub timestamp: Timestamp,
    pub value: f64,
}

impl SeriesPoint {
    pub fn new(timestamp: impl Into<Timestamp>, value: f64) -> Self {
        Self {
            timestamp: timestamp.into(),
            value,
        }
    }
}

/// Wraps raw values as a series indexed `0..n`.
pub fn indexed_series(values: &[f64]) -> Vec<SeriesPoint> {
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| SeriesPoint::new(i as i64, v))
        .collect()
}

/// One column of the trajectory matrix.
///
/// `values[j]` is the source value at `end_index + 1 - L + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedVector {
    values: Vec<f64>,
    end_index: usize,
}

impl EmbeddedVector {
    pub fn new(values: Vec<f64>, end_index: usize) -> Self {
        Self { values, end_index }
    }

    /// A free-standing vector, for queries that do not come from a series.
    pub fn from_values(values: Vec<f64>) -> Self {
        let end_index = values.len().saturating_sub(1);
        Self { values, end_index }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn end_index(&self) -> usize {
        self.end_index
    }

    /// Index of the first element in the source series.
    pub fn start_index(&self) -> usize {
        self.end_index + 1 - self.values.len()
    }
}

/// `L x M` trajectory matrix stored column by column.
#[derive(Debug, Clone, PartialEq)]
pub struct HankelMatrix {
    window: usize,
    columns: Vec<EmbeddedVector>,
}

impl HankelMatrix {
    /// Window length `L` (rows).
    pub fn window(&self) -> usize {
        self.window
    }

    /// Column count `M`.
    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn columns(&self) -> &[EmbeddedVector] {
        &self.columns
    }

    pub fn into_columns(self) -> Vec<EmbeddedVector> {
        self.columns
    }

    /// Entry at `(row, col)`, zero-based.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.columns[col].values[row]
    }

    /// Drops the oldest column and appends the column ending at `new_point`.
    pub fn slide(mut self, new_point: &SeriesPoint) -> Self {
        let last = self
            .columns
            .last()
            .expect("sliding requires a non-empty matrix");
        let mut values = Vec::with_capacity(self.window);
        values.extend_from_slice(&last.values[1..]);
        values.push(new_point.value);
        let next = EmbeddedVector::new(values, last.end_index + 1);
        self.columns.remove(0);
        self.columns.push(next);
        self
    }

    /// Recovers the source values: the first row followed by the tail of the
    /// last column.
    pub fn to_values(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.columns.iter().map(|c| c.values[0]).collect();
        if let Some(last) = self.columns.last() {
            out.extend_from_slice(&last.values[1..]);
        }
        out
    }
}

/// Builds the trajectory matrix of `series` with window length `window`.
///
/// Requires `2 <= L < n/2`; the result has `M = n - L + 1` columns.
pub fn embed_series(series: &[SeriesPoint], window: usize) -> Result<HankelMatrix> {
    let values: Vec<f64> = series.iter().map(|p| p.value).collect();
    embed_values(&values, window)
}

pub fn embed_values(values: &[f64], window: usize) -> Result<HankelMatrix> {
    let n = values.len();
    if n == 0 {
        return Err(Error::EmptySeries);
    }
    if window < 2 || 2 * window >= n {
        return Err(Error::InvalidWindowLength { window, len: n });
    }
    Ok(trajectory(values, window, 0))
}

/// Unchecked trajectory construction; `offset` is the source index of
/// `values[0]`.
pub(crate) fn trajectory(values: &[f64], window: usize, offset: usize) -> HankelMatrix {
    let columns = values
        .windows(window)
        .enumerate()
        .map(|(i, w)| EmbeddedVector::new(w.to_vec(), offset + i + window - 1))
        .collect();
    HankelMatrix { window, columns }
}

pub fn slide(matrix: HankelMatrix, new_point: &SeriesPoint) -> HankelMatrix {
    matrix.slide(new_point)
}

/// The `L` most recent values of `buffer`, in time order.
pub fn latest_vector(buffer: &[SeriesPoint], window: usize) -> Result<EmbeddedVector> {
    if buffer.len() < window || window == 0 {
        return Err(Error::InsufficientHistory {
            needed: window.max(1),
            have: buffer.len(),
        });
    }
    let start = buffer.len() - window;
    let values = buffer[start..].iter().map(|p| p.value).collect();
    Ok(EmbeddedVector::new(values, buffer.len() - 1))
}

/// Ring buffer of the last `L` observations of a stream.
#[derive(Debug, Clone)]
pub struct LagWindow {
    window: usize,
    buf: VecDeque<f64>,
    seen: usize,
}

impl LagWindow {
    pub fn new(window: usize) -> Self {
        Self {
            window,
            buf: VecDeque::with_capacity(window),
            seen: 0,
        }
    }

    /// Pushes a value and returns the embedded vector ending at it once
    /// `L` values have been seen.
    pub fn push(&mut self, value: f64) -> Option<EmbeddedVector> {
        if self.buf.len() == self.window {
            self.buf.pop_front();
        }
        self.buf.push_back(value);
        self.seen += 1;
        (self.buf.len() == self.window)
            .then(|| EmbeddedVector::new(self.buf.iter().copied().collect(), self.seen - 1))
    }

    pub fn seen(&self) -> usize {
        self.seen
    }
}
