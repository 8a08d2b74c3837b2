//! Library side of the `icad` binary: resolved run settings and the work
//! behind each subcommand, kept here so tests can drive it without a
//! process boundary.

pub mod config;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use icad_core::nab::io::{read_results, write_results, write_results_to, ResultRow};
use icad_core::nab::{
    corpus_score, load_series, load_windows, score_traces, threshold_sweep, CorpusScore,
    DetectionClass, ScoringLayout,
};
use icad_core::synthetic::{generate_corpus, write_corpus, CorpusSpec};
use icad_core::{
    detect_stream, probationary_length, AnomalyWindow, ApplicationProfile, FileTrace, ProfileName,
    SeriesPoint,
};
use rayon::prelude::*;
use serde::Serialize;

pub use config::{DetectorChoice, DetectorFlags, FileConfig, NcmChoice, RunConfig};

/// Maps a non-negative NCM value into [0, 1) without changing its order.
/// LoOP is already a probability and passes through.
pub fn squash(alpha: f64, ncm: NcmChoice) -> f64 {
    match ncm {
        NcmChoice::Loop => alpha.clamp(0.0, 1.0),
        _ => alpha / (1.0 + alpha),
    }
}

/// Runs the configured ICAD or raw detector over one series.
///
/// Raw rows keep the conformal p-value column so the file format is shared;
/// only the likelihood column differs.
pub fn run_detector(series: &[SeriesPoint], cfg: &RunConfig) -> Result<Vec<ResultRow>> {
    let records = detect_stream(series, cfg.icad())?;
    Ok(records
        .iter()
        .map(|r| {
            let mut row = ResultRow::from(r);
            if cfg.detector == DetectorChoice::Raw {
                row.likelihood = squash(r.alpha, cfg.ncm);
            }
            row
        })
        .collect())
}

/// `detect`: scores one series and writes a results file to `out`.
pub fn run_detect(input: &Path, cfg: &RunConfig, out: &mut impl Write) -> Result<usize> {
    ensure!(
        matches!(cfg.detector, DetectorChoice::Icad | DetectorChoice::Raw),
        "detect needs an icad or raw detector; null and perfect only exist against labels"
    );
    let series = load_series(input).with_context(|| format!("loading {}", input.display()))?;
    let rows =
        run_detector(&series, cfg).with_context(|| format!("scoring {}", input.display()))?;
    write_results_to(out, &rows)?;
    Ok(rows.len())
}

/// Likelihood traces for every labelled file under `data_dir`.
///
/// Files are processed in parallel; the output order follows the label
/// document, so results do not depend on scheduling.
pub fn corpus_traces(
    data_dir: &Path,
    labels: &BTreeMap<String, Vec<AnomalyWindow>>,
    cfg: &RunConfig,
    results_dir: Option<&Path>,
) -> Result<Vec<FileTrace>> {
    ensure!(!labels.is_empty(), "label document lists no files");
    labels
        .par_iter()
        .map(|(name, windows)| {
            let path = data_dir.join(name);
            let series =
                load_series(&path).with_context(|| format!("loading {}", path.display()))?;
            let likelihoods = match cfg.detector {
                DetectorChoice::Icad | DetectorChoice::Raw => {
                    let rows =
                        run_detector(&series, cfg).with_context(|| format!("scoring {name}"))?;
                    if let Some(dir) = results_dir {
                        let out = dir.join(name);
                        if let Some(parent) = out.parent() {
                            std::fs::create_dir_all(parent)?;
                        }
                        write_results(&out, &rows)?;
                    }
                    rows.iter().map(|r| r.likelihood).collect()
                }
                DetectorChoice::Null => vec![0.0; series.len()],
                DetectorChoice::Perfect => {
                    let trace = FileTrace {
                        name: name.clone(),
                        timestamps: series.iter().map(|p| p.timestamp).collect(),
                        likelihoods: vec![0.0; series.len()],
                        windows: windows.clone(),
                    };
                    trace
                        .layout()?
                        .perfect_flags()
                        .into_iter()
                        .map(|f| if f { 1.0 } else { 0.0 })
                        .collect()
                }
            };
            Ok(FileTrace {
                name: name.clone(),
                timestamps: series.iter().map(|p| p.timestamp).collect(),
                likelihoods,
                windows: windows.clone(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ProfileSummary {
    /// `None` stands for an infinite threshold, i.e. no alarms.
    pub threshold: Option<f64>,
    pub score: CorpusScore,
    /// Normalised score of the detector that never alarms (0 by construction).
    pub null_baseline: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CorpusSummary {
    pub detector: String,
    pub files: usize,
    pub config: RunConfig,
    pub profiles: BTreeMap<ProfileName, ProfileSummary>,
}

fn finite(t: f64) -> Option<f64> {
    t.is_finite().then_some(t)
}

fn null_baseline(traces: &[FileTrace], profile: &ApplicationProfile) -> Result<f64> {
    let layouts = traces
        .iter()
        .map(FileTrace::layout)
        .collect::<icad_core::Result<Vec<ScoringLayout>>>()?;
    let flags: Vec<Vec<bool>> = layouts.iter().map(|l| vec![false; l.len()]).collect();
    Ok(corpus_score(&layouts, &flags, profile)?.normalized)
}

/// `bench`: scores a labelled corpus at the configured threshold under every
/// application profile.
pub fn run_bench(
    data_dir: &Path,
    labels_path: &Path,
    cfg: &RunConfig,
    results_dir: Option<&Path>,
) -> Result<CorpusSummary> {
    let labels = load_windows(labels_path)
        .with_context(|| format!("loading labels {}", labels_path.display()))?;
    let traces = corpus_traces(data_dir, &labels, cfg, results_dir)?;
    let threshold = match cfg.detector {
        // binary traces: anything flagged is 1
        DetectorChoice::Null | DetectorChoice::Perfect => 0.5,
        _ => cfg.threshold,
    };
    let mut profiles = BTreeMap::new();
    for profile in ApplicationProfile::ALL {
        let score = score_traces(&traces, threshold, &profile)?;
        profiles.insert(
            profile.name,
            ProfileSummary {
                threshold: Some(threshold),
                score,
                null_baseline: null_baseline(&traces, &profile)?,
            },
        );
    }
    Ok(summary(cfg, traces.len(), profiles))
}

/// `sweep`: like `bench`, but each profile gets its own best threshold.
pub fn run_sweep(data_dir: &Path, labels_path: &Path, cfg: &RunConfig) -> Result<CorpusSummary> {
    let labels = load_windows(labels_path)
        .with_context(|| format!("loading labels {}", labels_path.display()))?;
    let traces = corpus_traces(data_dir, &labels, cfg, None)?;
    sweep_traces(&traces, cfg)
}

pub fn sweep_traces(traces: &[FileTrace], cfg: &RunConfig) -> Result<CorpusSummary> {
    let mut profiles = BTreeMap::new();
    for profile in ApplicationProfile::ALL {
        let best = threshold_sweep(traces, &profile)?;
        profiles.insert(
            profile.name,
            ProfileSummary {
                threshold: finite(best.threshold),
                score: best.score,
                null_baseline: null_baseline(traces, &profile)?,
            },
        );
    }
    Ok(summary(cfg, traces.len(), profiles))
}

fn summary(
    cfg: &RunConfig,
    files: usize,
    profiles: BTreeMap<ProfileName, ProfileSummary>,
) -> CorpusSummary {
    CorpusSummary {
        detector: cfg.detector_label(),
        files,
        config: cfg.clone(),
        profiles,
    }
}

/// One row of plot data.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotRow {
    pub row: ResultRow,
    pub in_window: bool,
    pub class: DetectionClass,
}

pub const PLOT_HEADER: &str = "timestamp,value,anomaly_likelihood,in_window,class";

/// Joins a results file with its labels: per row, whether it lies in a
/// window and how a detection there would be classified at `threshold`.
pub fn emit_plot_data(
    rows: &[ResultRow],
    windows: &[AnomalyWindow],
    threshold: f64,
) -> Result<Vec<PlotRow>> {
    let timestamps: Vec<_> = rows.iter().map(|r| r.timestamp).collect();
    if let Some(i) = timestamps.windows(2).position(|w| w[0] >= w[1]) {
        bail!("results timestamps are not increasing at row {}", i + 2);
    }
    let layout = ScoringLayout::new(&timestamps, windows, probationary_length(rows.len()))?;
    let flags: Vec<bool> = rows.iter().map(|r| r.likelihood >= threshold).collect();
    let classes = layout.classify(&flags);
    Ok(rows
        .iter()
        .zip(layout.in_window())
        .zip(classes)
        .map(|((row, &in_window), class)| PlotRow {
            row: *row,
            in_window,
            class,
        })
        .collect())
}

pub fn write_plot_data(out: &mut impl Write, rows: &[PlotRow]) -> std::io::Result<()> {
    writeln!(out, "{PLOT_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.row.timestamp, r.row.value, r.row.likelihood, r.in_window as u8, r.class
        )?;
    }
    Ok(())
}

/// `plotdata`: reads a results file and the windows of `key` from a label
/// document.
pub fn run_plot_data(
    results: &Path,
    labels_path: &Path,
    key: &str,
    threshold: f64,
    out: &mut impl Write,
) -> Result<usize> {
    let rows = read_results(results).with_context(|| format!("loading {}", results.display()))?;
    let labels = load_windows(labels_path)
        .with_context(|| format!("loading labels {}", labels_path.display()))?;
    let Some(windows) = labels.get(key) else {
        bail!("{key:?} is not listed in {}", labels_path.display());
    };
    let plot = emit_plot_data(&rows, windows, threshold)?;
    write_plot_data(out, &plot)?;
    Ok(plot.len())
}

/// `generate`: writes a seeded synthetic corpus and returns the label path.
pub fn generate(root: &Path, spec: CorpusSpec) -> Result<PathBuf> {
    ensure!(spec.files > 0, "need at least one file");
    ensure!(
        spec.length >= 200,
        "files shorter than 200 rows leave no room for anomalies"
    );
    Ok(write_corpus(&generate_corpus(spec), root)?)
}
