//! Inductive conformal anomaly detection (ICAD).
//!
//! History is embedded into `T + C` lagged vectors. The first `T` form the
//! proper-training (reference) set on which the metric and the NCM are
//! fitted; the last `C` are scored against it to give the calibration
//! scores. A test vector `z` ending at the newest observation is scored the
//! same way and its p-value is the fraction of calibration scores at least as
//! large:
//!
//! ```text
//! p = |{ i : alpha_i >= alpha_z }| / C
//! ```
//!
//! In streaming mode each scored `z` joins the calibration scores FIFO (the
//! oldest one retires), and every `recalibration_period` points the
//! reference, metric and calibration scores are rebuilt from the most recent
//! `T + C` columns.

use std::collections::VecDeque;

use crate::embedding::{
    trajectory, EmbeddedVector, HankelMatrix, LagWindow, SeriesPoint, Timestamp,
};
use crate::error::{Error, Result};
use crate::ncm::{FittedNcm, NcmKind, ReferenceSet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcadConfig {
    /// Window length `L`.
    pub window: usize,
    /// Proper-training size `T`.
    pub train_size: usize,
    /// Calibration size `C`.
    pub calibration_size: usize,
    pub ncm: NcmKind,
    pub shrinkage: f64,
    /// Scored points between reference refreshes.
    pub recalibration_period: usize,
}

impl Default for IcadConfig {
    fn default() -> Self {
        Self {
            window: 16,
            train_size: 512,
            calibration_size: 128,
            ncm: NcmKind::Knn { k: 27 },
            shrinkage: 0.1,
            recalibration_period: 500,
        }
    }
}

impl IcadConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.window < 2 {
            return bad(format!("window length must be >= 2, got {}", self.window));
        }
        if self.calibration_size == 0 {
            return bad("calibration size must be >= 1".into());
        }
        if self.train_size <= self.ncm.k() || self.ncm.k() == 0 {
            return bad(format!(
                "need 1 <= k < T, got k = {} and T = {}",
                self.ncm.k(),
                self.train_size
            ));
        }
        // 1 < L < n/2 for the n = T + C + L - 1 points embedded at each fit
        if self.train_size + self.calibration_size < self.window + 2 {
            return bad(format!(
                "T + C = {} too small for window length {}",
                self.train_size + self.calibration_size,
                self.window
            ));
        }
        if self.recalibration_period == 0 {
            return bad("recalibration period must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.shrinkage) {
            return Err(Error::InvalidShrinkage(self.shrinkage));
        }
        if let NcmKind::Loop { lambda, .. } = self.ncm {
            if !(lambda.is_finite() && lambda > 0.0) {
                return Err(Error::InvalidLambda(lambda));
            }
        }
        Ok(())
    }

    /// Number of leading points that only feed the history (`T + C + L - 1`).
    pub fn warmup(&self) -> usize {
        self.train_size + self.calibration_size + self.window - 1
    }
}

/// Non-conformity scores of the calibration vectors, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationScores {
    alphas: VecDeque<f64>,
}

impl CalibrationScores {
    pub fn new(alphas: Vec<f64>) -> Result<Self> {
        if alphas.is_empty() {
            return Err(Error::InvalidConfig("calibration scores are empty".into()));
        }
        if let Some(a) = alphas.iter().find(|a| !(a.is_finite() && **a >= 0.0)) {
            return Err(Error::InvalidConfig(format!(
                "calibration score {a} is not a finite non-negative number"
            )));
        }
        Ok(Self {
            alphas: alphas.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.alphas.iter().copied()
    }

    /// Appends the newest score and retires the oldest.
    pub fn push(&mut self, alpha: f64) {
        self.alphas.pop_front();
        self.alphas.push_back(alpha);
    }
}

/// Chronological split of a `T + C` column matrix into training and
/// calibration columns.
pub fn split(
    matrix: HankelMatrix,
    train: usize,
    calibration: usize,
) -> Result<(Vec<EmbeddedVector>, Vec<EmbeddedVector>)> {
    if calibration == 0 || train == 0 || matrix.len() != train + calibration {
        return Err(Error::ShapeMismatch {
            columns: matrix.len(),
            train,
            calibration,
        });
    }
    let mut columns = matrix.into_columns();
    let calib = columns.split_off(train);
    Ok((columns, calib))
}

pub fn calibrate(model: &FittedNcm, calibration: &[EmbeddedVector]) -> Result<CalibrationScores> {
    let alphas = calibration
        .iter()
        .map(|v| model.score(v))
        .collect::<Result<Vec<f64>>>()?;
    CalibrationScores::new(alphas)
}

pub fn p_value(alpha_test: f64, scores: &CalibrationScores) -> f64 {
    let at_least = scores.iter().filter(|&a| a >= alpha_test).count();
    at_least as f64 / scores.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionRecord {
    pub timestamp: Timestamp,
    pub value: f64,
    /// Non-conformity score of the test vector; 0 during warm-up.
    pub alpha: f64,
    pub p: f64,
    /// `1 - p`: high means anomalous.
    pub likelihood: f64,
}

impl DetectionRecord {
    fn warmup(point: &SeriesPoint) -> Self {
        Self {
            timestamp: point.timestamp,
            value: point.value,
            alpha: 0.0,
            p: 1.0,
            likelihood: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
struct Calibrated {
    model: FittedNcm,
    scores: CalibrationScores,
}

/// Streaming ICAD detector for one series.
#[derive(Debug, Clone)]
pub struct IcadDetector {
    config: IcadConfig,
    lag: LagWindow,
    history: VecDeque<EmbeddedVector>,
    state: Option<Calibrated>,
    since_refit: usize,
}

impl IcadDetector {
    pub fn new(config: IcadConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            lag: LagWindow::new(config.window),
            history: VecDeque::with_capacity(config.train_size + config.calibration_size + 1),
            state: None,
            since_refit: 0,
        })
    }

    pub fn config(&self) -> &IcadConfig {
        &self.config
    }

    pub fn is_calibrated(&self) -> bool {
        self.state.is_some()
    }

    pub fn push(&mut self, point: SeriesPoint) -> Result<DetectionRecord> {
        let Some(z) = self.lag.push(point.value) else {
            return Ok(DetectionRecord::warmup(&point));
        };
        let Some(state) = self.state.as_mut() else {
            self.remember(z);
            if self.history.len() == self.capacity() {
                self.refit()?;
            }
            return Ok(DetectionRecord::warmup(&point));
        };

        let alpha = state.model.score(&z)?;
        let p = p_value(alpha, &state.scores);
        state.scores.push(alpha);
        self.remember(z);
        self.since_refit += 1;
        if self.since_refit == self.config.recalibration_period {
            self.refit()?;
        }
        Ok(DetectionRecord {
            timestamp: point.timestamp,
            value: point.value,
            alpha,
            p,
            likelihood: 1.0 - p,
        })
    }

    fn capacity(&self) -> usize {
        self.config.train_size + self.config.calibration_size
    }

    fn remember(&mut self, z: EmbeddedVector) {
        if self.history.len() == self.capacity() {
            self.history.pop_front();
        }
        self.history.push_back(z);
    }

    fn refit(&mut self) -> Result<()> {
        let cfg = self.config;
        let columns: Vec<EmbeddedVector> = self.history.iter().cloned().collect();
        let (train, calib) = split(
            matrix_of(columns, cfg.window),
            cfg.train_size,
            cfg.calibration_size,
        )?;
        let reference = ReferenceSet::fit(train, cfg.shrinkage)?;
        let model = FittedNcm::fit(reference, cfg.ncm)?;
        let scores = calibrate(&model, &calib)?;
        self.state = Some(Calibrated { model, scores });
        self.since_refit = 0;
        Ok(())
    }
}

fn matrix_of(columns: Vec<EmbeddedVector>, window: usize) -> HankelMatrix {
    // history columns are consecutive, so rebuilding from the source values
    // gives the same matrix
    let offset = columns[0].start_index();
    let mut values: Vec<f64> = columns.iter().map(|c| c.values()[0]).collect();
    values.extend_from_slice(&columns[columns.len() - 1].values()[1..]);
    trajectory(&values, window, offset)
}

/// Runs the detector over a whole series.
pub fn detect_stream(series: &[SeriesPoint], config: IcadConfig) -> Result<Vec<DetectionRecord>> {
    let mut detector = IcadDetector::new(config)?;
    series.iter().map(|p| detector.push(*p)).collect()
}

/// Single-shot ICAD: embeds `history` (exactly `T + C + L - 1` points), fits
/// on the first `T` columns, calibrates on the last `C`, and returns the
/// p-value of the vector ending at `test`.
pub fn icad_p_value(history: &[f64], test: f64, config: &IcadConfig) -> Result<f64> {
    config.validate()?;
    if history.len() != config.warmup() {
        return Err(Error::InsufficientHistory {
            needed: config.warmup(),
            have: history.len(),
        });
    }
    let matrix = crate::embedding::embed_values(history, config.window)?;
    let (train, calib) = split(matrix, config.train_size, config.calibration_size)?;
    let model = FittedNcm::fit(ReferenceSet::fit(train, config.shrinkage)?, config.ncm)?;
    let scores = calibrate(&model, &calib)?;
    let l = config.window;
    let mut z: Vec<f64> = history[history.len() - (l - 1)..].to_vec();
    z.push(test);
    let alpha = model.score(&EmbeddedVector::new(z, history.len()))?;
    Ok(p_value(alpha, &scores))
}
