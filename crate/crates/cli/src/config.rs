//! Run configuration: defaults, then an optional config file, then flags.

use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use icad_core::ncm::DEFAULT_LOOP_LAMBDA;
use icad_core::{IcadConfig, NcmKind, ProfileName};
use serde::{Deserialize, Serialize};

pub const DEFAULT_THRESHOLD: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NcmChoice {
    Knn,
    Lof,
    Loop,
}

/// What produces the likelihood trace of a file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectorChoice {
    /// Conformal p-values over the chosen NCM.
    Icad,
    /// The NCM value itself, squashed monotonically into [0, 1).
    Raw,
    /// Never raises an alarm.
    Null,
    /// One alarm at the start of every labelled window.
    Perfect,
}

/// Keys accepted in a config file (TOML, flat `key = value` lines).
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub window: Option<usize>,
    pub train_size: Option<usize>,
    pub calibration_size: Option<usize>,
    pub ncm: Option<NcmChoice>,
    pub k: Option<usize>,
    pub loop_lambda: Option<f64>,
    pub shrinkage: Option<f64>,
    pub recalibration_period: Option<usize>,
    pub threshold: Option<f64>,
    pub profile: Option<String>,
    pub detector: Option<DetectorChoice>,
    pub seed: Option<u64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// Detector flags shared by several subcommands.
#[derive(Debug, Clone, Default, Args)]
pub struct DetectorFlags {
    /// Window length L.
    #[arg(short = 'L', long)]
    pub window: Option<usize>,
    /// Proper-training size T.
    #[arg(short = 'T', long)]
    pub train_size: Option<usize>,
    /// Calibration size C.
    #[arg(short = 'C', long)]
    pub calibration_size: Option<usize>,
    #[arg(long, value_enum)]
    pub ncm: Option<NcmChoice>,
    /// Neighbour count.
    #[arg(short, long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub loop_lambda: Option<f64>,
    #[arg(long)]
    pub shrinkage: Option<f64>,
    #[arg(long)]
    pub recalibration_period: Option<usize>,
    #[arg(long, value_enum)]
    pub detector: Option<DetectorChoice>,
}

/// Fully resolved settings for one run.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub window: usize,
    pub train_size: usize,
    pub calibration_size: usize,
    pub ncm: NcmChoice,
    pub k: usize,
    pub loop_lambda: f64,
    pub shrinkage: f64,
    pub recalibration_period: usize,
    pub detector: DetectorChoice,
    pub threshold: f64,
    pub profile: ProfileName,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let icad = IcadConfig::default();
        Self {
            window: icad.window,
            train_size: icad.train_size,
            calibration_size: icad.calibration_size,
            ncm: NcmChoice::Knn,
            k: icad.ncm.k(),
            loop_lambda: DEFAULT_LOOP_LAMBDA,
            shrinkage: icad.shrinkage,
            recalibration_period: icad.recalibration_period,
            detector: DetectorChoice::Icad,
            threshold: DEFAULT_THRESHOLD,
            profile: ProfileName::Standard,
            seed: 2017,
        }
    }
}

impl RunConfig {
    pub fn resolve(
        file: Option<&FileConfig>,
        flags: &DetectorFlags,
        threshold: Option<f64>,
        profile: Option<&str>,
        seed: Option<u64>,
    ) -> Result<Self> {
        let mut cfg = RunConfig::default();
        if let Some(f) = file {
            cfg.apply(
                &DetectorFlags {
                    window: f.window,
                    train_size: f.train_size,
                    calibration_size: f.calibration_size,
                    ncm: f.ncm,
                    k: f.k,
                    loop_lambda: f.loop_lambda,
                    shrinkage: f.shrinkage,
                    recalibration_period: f.recalibration_period,
                    detector: f.detector,
                },
                f.threshold,
                f.profile.as_deref(),
                f.seed,
            )?;
        }
        cfg.apply(flags, threshold, profile, seed)?;
        if !(0.0..=1.0).contains(&cfg.threshold) {
            bail!("threshold must lie in [0, 1], got {}", cfg.threshold);
        }
        cfg.icad().validate()?;
        Ok(cfg)
    }

    fn apply(
        &mut self,
        f: &DetectorFlags,
        threshold: Option<f64>,
        profile: Option<&str>,
        seed: Option<u64>,
    ) -> Result<()> {
        macro_rules! set {
            ($($field:ident),*) => { $( if let Some(v) = f.$field { self.$field = v; } )* };
        }
        set!(
            window,
            train_size,
            calibration_size,
            ncm,
            k,
            loop_lambda,
            shrinkage,
            recalibration_period,
            detector
        );
        if let Some(t) = threshold {
            self.threshold = t;
        }
        if let Some(p) = profile {
            self.profile = p.parse()?;
        }
        if let Some(s) = seed {
            self.seed = s;
        }
        Ok(())
    }

    pub fn ncm_kind(&self) -> NcmKind {
        match self.ncm {
            NcmChoice::Knn => NcmKind::Knn { k: self.k },
            NcmChoice::Lof => NcmKind::Lof { k: self.k },
            NcmChoice::Loop => NcmKind::Loop {
                k: self.k,
                lambda: self.loop_lambda,
            },
        }
    }

    pub fn icad(&self) -> IcadConfig {
        IcadConfig {
            window: self.window,
            train_size: self.train_size,
            calibration_size: self.calibration_size,
            ncm: self.ncm_kind(),
            shrinkage: self.shrinkage,
            recalibration_period: self.recalibration_period,
        }
    }

    /// Short label such as `knn-icad` or `raw-lof`.
    pub fn detector_label(&self) -> String {
        match self.detector {
            DetectorChoice::Icad => format!("{}-icad", self.ncm_kind().name()),
            DetectorChoice::Raw => format!("raw-{}", self.ncm_kind().name()),
            DetectorChoice::Null => "null".into(),
            DetectorChoice::Perfect => "perfect".into(),
        }
    }
}
