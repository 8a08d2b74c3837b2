//! Window-based scoring of anomaly detections.
//!
//! Every row of a labelled file gets a role:
//!
//! * rows in the probationary prefix (first 15%) are never scored;
//! * a row inside an anomaly window contributes `sigmoid(y) * A_TP` if it
//!   is the earliest detection in that window, and nothing otherwise;
//! * a detection outside all windows is a false positive worth
//!   `sigmoid(y) * |A_FP|` (negative) when it follows a window, or
//!   `-|A_FP|` when no window precedes it;
//! * each window without a detection costs `|A_FN|`.
//!
//! `y` is the row offset from the window's right edge divided by half the
//! window span, so a detection at the left edge sits at `y = -2` and the
//! labelled anomaly at the window centre at `y = -1`. True negatives never
//! contribute.
//!
//! Corpus scores are normalised so that the null detector (no detections)
//! scores 0 and the perfect detector (one detection at the first scoreable
//! row of each window) scores 100.

pub mod io;

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::embedding::Timestamp;
use crate::error::{Error, Result};

pub use io::{load_series, load_windows, parse_series, parse_windows, read_results, write_results};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AnomalyWindow {
    pub start: Timestamp,
    pub end: Timestamp,
}

impl AnomalyWindow {
    pub fn new(start: impl Into<Timestamp>, end: impl Into<Timestamp>) -> Self {
        Self {
            start: start.into(),
            end: end.into(),
        }
    }

    pub fn contains(&self, t: &Timestamp) -> bool {
        self.start <= *t && *t <= self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileName {
    Standard,
    RewardLowFp,
    RewardLowFn,
}

impl fmt::Display for ProfileName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProfileName::Standard => "standard",
            ProfileName::RewardLowFp => "reward_low_fp",
            ProfileName::RewardLowFn => "reward_low_fn",
        })
    }
}

impl FromStr for ProfileName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "standard" => Ok(ProfileName::Standard),
            "reward_low_fp" | "low_fp" => Ok(ProfileName::RewardLowFp),
            "reward_low_fn" | "low_fn" => Ok(ProfileName::RewardLowFn),
            other => Err(Error::InvalidConfig(format!("unknown profile {other:?}"))),
        }
    }
}

/// Weights `(A_TP, A_FP, A_TN, A_FN)` of an application profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApplicationProfile {
    pub name: ProfileName,
    pub a_tp: f64,
    pub a_fp: f64,
    pub a_tn: f64,
    pub a_fn: f64,
}

impl ApplicationProfile {
    pub const STANDARD: Self = Self {
        name: ProfileName::Standard,
        a_tp: 1.0,
        a_fp: -0.11,
        a_tn: 1.0,
        a_fn: -1.0,
    };
    pub const REWARD_LOW_FP: Self = Self {
        name: ProfileName::RewardLowFp,
        a_tp: 1.0,
        a_fp: -0.22,
        a_tn: 1.0,
        a_fn: -1.0,
    };
    pub const REWARD_LOW_FN: Self = Self {
        name: ProfileName::RewardLowFn,
        a_tp: 1.0,
        a_fp: -0.11,
        a_tn: 1.0,
        a_fn: -2.0,
    };

    pub const ALL: [Self; 3] = [Self::STANDARD, Self::REWARD_LOW_FP, Self::REWARD_LOW_FN];

    pub fn named(name: ProfileName) -> Self {
        match name {
            ProfileName::Standard => Self::STANDARD,
            ProfileName::RewardLowFp => Self::REWARD_LOW_FP,
            ProfileName::RewardLowFn => Self::REWARD_LOW_FN,
        }
    }
}

/// Length of the unscored prefix: `floor(0.15 n)`.
pub fn probationary_length(n: usize) -> usize {
    n * 15 / 100
}

/// `2 / (1 + e^{5y}) - 1`: +1 far before the window's right edge, 0 at it,
/// -1 far after it.
pub fn sigmoid_weight(rel_pos: f64) -> f64 {
    2.0 / (1.0 + (5.0 * rel_pos).exp()) - 1.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum RowRole {
    Probation,
    InWindow { window: usize, weight: f64 },
    Outside { weight: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum DetectionClass {
    None,
    #[serde(rename = "TP")]
    TruePositive,
    #[serde(rename = "FP")]
    FalsePositive,
}

impl fmt::Display for DetectionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DetectionClass::None => "none",
            DetectionClass::TruePositive => "TP",
            DetectionClass::FalsePositive => "FP",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct FileScore {
    pub raw: f64,
    pub tp_count: usize,
    pub fp_count: usize,
    pub fn_count: usize,
}

/// Per-row scoring roles of one labelled file.
#[derive(Debug, Clone)]
pub struct ScoringLayout {
    rows: Vec<RowRole>,
    in_window: Vec<bool>,
    windows: usize,
}

impl ScoringLayout {
    /// `timestamps` must be strictly increasing. Windows that cover no row are
    /// dropped.
    pub fn new(
        timestamps: &[Timestamp],
        windows: &[AnomalyWindow],
        probation: usize,
    ) -> Result<Self> {
        if let Some(i) = (1..timestamps.len()).find(|&i| timestamps[i] <= timestamps[i - 1]) {
            return Err(Error::UnorderedDetections(i));
        }
        let mut spans: Vec<(usize, usize)> = windows
            .iter()
            .filter_map(|w| {
                let left = timestamps.partition_point(|t| *t < w.start);
                let right = timestamps.partition_point(|t| *t <= w.end);
                (right > left).then(|| (left, right - 1))
            })
            .collect();
        spans.sort_unstable();

        let n = timestamps.len();
        let mut rows = Vec::with_capacity(n);
        let mut in_window = vec![false; n];
        let mut next = 0;
        let mut previous: Option<(usize, f64)> = None;
        for (i, flag) in in_window.iter_mut().enumerate() {
            while next < spans.len() && spans[next].1 < i {
                let (left, right) = spans[next];
                previous = Some((right, half_span(left, right)));
                next += 1;
            }
            let current = spans.get(next).filter(|(left, _)| *left <= i);
            *flag = current.is_some();
            let role = if i < probation {
                RowRole::Probation
            } else if let Some(&(left, right)) = current {
                RowRole::InWindow {
                    window: next,
                    weight: sigmoid_weight(-((right - i) as f64) / half_span(left, right)),
                }
            } else if let Some((right, scale)) = previous {
                RowRole::Outside {
                    weight: sigmoid_weight((i - right) as f64 / scale),
                }
            } else {
                RowRole::Outside { weight: -1.0 }
            };
            rows.push(role);
        }
        Ok(Self {
            rows,
            in_window,
            windows: spans.len(),
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn window_count(&self) -> usize {
        self.windows
    }

    pub fn in_window(&self) -> &[bool] {
        &self.in_window
    }

    pub fn classify(&self, flags: &[bool]) -> Vec<DetectionClass> {
        let mut seen = vec![false; self.windows];
        self.rows
            .iter()
            .zip(flags)
            .map(|(role, &flag)| match (role, flag) {
                (_, false) | (RowRole::Probation, _) => DetectionClass::None,
                (RowRole::Outside { .. }, true) => DetectionClass::FalsePositive,
                (RowRole::InWindow { window, .. }, true) => {
                    if std::mem::replace(&mut seen[*window], true) {
                        DetectionClass::None
                    } else {
                        DetectionClass::TruePositive
                    }
                }
            })
            .collect()
    }

    pub fn score(&self, flags: &[bool], profile: &ApplicationProfile) -> FileScore {
        let mut out = FileScore::default();
        let mut detected = vec![false; self.windows];
        for (role, &flag) in self.rows.iter().zip(flags) {
            if !flag {
                continue;
            }
            match *role {
                RowRole::Probation => {}
                RowRole::Outside { weight } => {
                    out.raw += weight * profile.a_fp.abs();
                    out.fp_count += 1;
                }
                RowRole::InWindow { window, weight } => {
                    if !std::mem::replace(&mut detected[window], true) {
                        out.raw += weight * profile.a_tp;
                        out.tp_count += 1;
                    }
                }
            }
        }
        out.fn_count = self.windows - out.tp_count;
        out.raw -= out.fn_count as f64 * profile.a_fn.abs();
        out
    }

    /// One detection at the first scoreable row of every window.
    pub fn perfect_flags(&self) -> Vec<bool> {
        let mut seen = vec![false; self.windows];
        self.rows
            .iter()
            .map(|role| match role {
                RowRole::InWindow { window, .. } => !std::mem::replace(&mut seen[*window], true),
                _ => false,
            })
            .collect()
    }

    pub fn null_raw(&self, profile: &ApplicationProfile) -> f64 {
        -(self.windows as f64) * profile.a_fn.abs()
    }

    pub fn perfect_raw(&self, profile: &ApplicationProfile) -> f64 {
        self.score(&self.perfect_flags(), profile).raw
    }
}

fn half_span(left: usize, right: usize) -> f64 {
    (right - left).max(1) as f64 / 2.0
}

/// Scores thresholded detections of one file against its windows.
pub fn score_file(
    detections: &[(Timestamp, bool)],
    windows: &[AnomalyWindow],
    profile: &ApplicationProfile,
    probation: usize,
) -> Result<FileScore> {
    let timestamps: Vec<Timestamp> = detections.iter().map(|d| d.0).collect();
    let flags: Vec<bool> = detections.iter().map(|d| d.1).collect();
    let layout = ScoringLayout::new(&timestamps, windows, probation)?;
    Ok(layout.score(&flags, profile))
}

/// Affine map sending the null sum to 0 and the perfect sum to 100.
pub fn normalize_score(raw_sum: f64, null_sum: f64, perfect_sum: f64) -> Result<f64> {
    if perfect_sum <= null_sum {
        return Err(Error::DegenerateBaseline);
    }
    Ok(100.0 * (raw_sum - null_sum) / (perfect_sum - null_sum))
}

/// The baseline that never raises an alarm.
pub fn null_detector<T>(series: &[T]) -> Vec<bool> {
    vec![false; series.len()]
}

/// Anomaly likelihoods of one labelled file.
#[derive(Debug, Clone)]
pub struct FileTrace {
    pub name: String,
    pub timestamps: Vec<Timestamp>,
    pub likelihoods: Vec<f64>,
    pub windows: Vec<AnomalyWindow>,
}

impl FileTrace {
    pub fn layout(&self) -> Result<ScoringLayout> {
        if self.likelihoods.len() != self.timestamps.len() {
            return Err(Error::InvalidConfig(format!(
                "{}: {} likelihoods for {} timestamps",
                self.name,
                self.likelihoods.len(),
                self.timestamps.len()
            )));
        }
        ScoringLayout::new(
            &self.timestamps,
            &self.windows,
            probationary_length(self.timestamps.len()),
        )
    }

    /// Detections at `threshold`: likelihood `>= threshold`.
    pub fn flags(&self, threshold: f64) -> Vec<bool> {
        self.likelihoods.iter().map(|&l| l >= threshold).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorpusScore {
    pub profile: ProfileName,
    pub raw: f64,
    pub null: f64,
    pub perfect: f64,
    pub normalized: f64,
    pub tp_count: usize,
    pub fp_count: usize,
    pub fn_count: usize,
}

/// Scores per-file detections as one corpus.
pub fn corpus_score(
    layouts: &[ScoringLayout],
    flags: &[Vec<bool>],
    profile: &ApplicationProfile,
) -> Result<CorpusScore> {
    if layouts.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut out = CorpusScore {
        profile: profile.name,
        raw: 0.0,
        null: 0.0,
        perfect: 0.0,
        normalized: 0.0,
        tp_count: 0,
        fp_count: 0,
        fn_count: 0,
    };
    for (layout, f) in layouts.iter().zip(flags) {
        let s = layout.score(f, profile);
        out.raw += s.raw;
        out.tp_count += s.tp_count;
        out.fp_count += s.fp_count;
        out.fn_count += s.fn_count;
        out.null += layout.null_raw(profile);
        out.perfect += layout.perfect_raw(profile);
    }
    out.normalized = normalize_score(out.raw, out.null, out.perfect)?;
    Ok(out)
}

pub fn score_traces(
    traces: &[FileTrace],
    threshold: f64,
    profile: &ApplicationProfile,
) -> Result<CorpusScore> {
    let layouts = traces
        .iter()
        .map(FileTrace::layout)
        .collect::<Result<Vec<_>>>()?;
    let flags: Vec<Vec<bool>> = traces.iter().map(|t| t.flags(threshold)).collect();
    corpus_score(&layouts, &flags, profile)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepResult {
    /// Best threshold; `+inf` when raising no alarm at all wins.
    pub threshold: f64,
    pub score: CorpusScore,
}

// Normalised scores closer than this count as tied.
const SWEEP_TIE: f64 = 1e-9;

/// Finds the corpus-wide threshold that maximises the normalised score.
///
/// Candidates are the distinct likelihood values plus `+inf` (no
/// detections). Ties go to the lowest threshold.
pub fn threshold_sweep(traces: &[FileTrace], profile: &ApplicationProfile) -> Result<SweepResult> {
    if traces.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let layouts = traces
        .iter()
        .map(FileTrace::layout)
        .collect::<Result<Vec<_>>>()?;
    let null: f64 = layouts.iter().map(|l| l.null_raw(profile)).sum();
    let perfect: f64 = layouts.iter().map(|l| l.perfect_raw(profile)).sum();
    normalize_score(null, null, perfect)?;

    let mut events: Vec<(f64, usize, usize)> = Vec::new();
    for (f, (trace, layout)) in traces.iter().zip(&layouts).enumerate() {
        for (i, role) in layout.rows.iter().enumerate() {
            if *role != RowRole::Probation {
                events.push((trace.likelihoods[i], f, i));
            }
        }
    }
    events.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let a_fp = profile.a_fp.abs();
    let a_fn = profile.a_fn.abs();
    let mut earliest: Vec<Vec<Option<(usize, f64)>>> =
        layouts.iter().map(|l| vec![None; l.windows]).collect();
    let mut raw = null;
    let mut best_threshold = f64::INFINITY;
    let mut best_score = 0.0;

    let mut start = 0;
    while start < events.len() {
        let value = events[start].0;
        let mut end = start;
        while end < events.len() && events[end].0 == value {
            let (_, f, i) = events[end];
            match layouts[f].rows[i] {
                RowRole::Probation => {}
                RowRole::Outside { weight } => raw += weight * a_fp,
                RowRole::InWindow { window, weight } => match earliest[f][window] {
                    None => {
                        raw += weight * profile.a_tp + a_fn;
                        earliest[f][window] = Some((i, weight));
                    }
                    Some((row, old)) if i < row => {
                        raw += (weight - old) * profile.a_tp;
                        earliest[f][window] = Some((i, weight));
                    }
                    Some(_) => {}
                },
            }
            end += 1;
        }
        let score = 100.0 * (raw - null) / (perfect - null);
        if score >= best_score - SWEEP_TIE {
            best_threshold = value;
            best_score = best_score.max(score);
        }
        start = end;
    }

    let score = score_traces(traces, best_threshold, profile)?;
    Ok(SweepResult {
        threshold: best_threshold,
        score,
    })
}
