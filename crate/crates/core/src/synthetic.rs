//! Seeded generator for a small labelled corpus.
//!
//! Each file is a quasi-periodic signal (two sinusoids plus Gaussian noise)
//! with its own level, scale and periods. Two or three anomalies are
//! injected after the first 30% of the file: a spike, a temporary level
//! shift or a burst of extra variance. Every anomaly gets a window centred on
//! its onset whose width is 10% of the file length divided by the anomaly
//! count.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::embedding::{SeriesPoint, Timestamp};
use crate::error::{Error, Result};
use crate::nab::io::windows_to_json;
use crate::nab::AnomalyWindow;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnomalyKind {
    Spike,
    LevelShift,
    VarianceBurst,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InjectedAnomaly {
    pub kind: AnomalyKind,
    pub onset: usize,
}

#[derive(Debug, Clone)]
pub struct SyntheticFile {
    /// Path relative to the corpus root, as used in the label document.
    pub name: String,
    pub series: Vec<SeriesPoint>,
    pub windows: Vec<AnomalyWindow>,
    pub anomalies: Vec<InjectedAnomaly>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorpusSpec {
    pub files: usize,
    pub length: usize,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            files: 10,
            length: 3000,
            seed: 2017,
        }
    }
}

fn timestamp(i: usize) -> Timestamp {
    let origin = NaiveDate::from_ymd_opt(2024, 1, 1)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .expect("valid origin");
    Timestamp::DateTime(origin + Duration::minutes(5 * i as i64))
}

pub fn generate_corpus(spec: CorpusSpec) -> Vec<SyntheticFile> {
    (0..spec.files)
        .map(|i| generate_file(spec.seed, i, spec.length))
        .collect()
}

fn generate_file(seed: u64, index: usize, n: usize) -> SyntheticFile {
    let mut rng =
        ChaCha8Rng::seed_from_u64(seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let tau = std::f64::consts::TAU;

    let level = rng.random_range(0.0..1000.0);
    let scale = 10f64.powf(rng.random_range(-1.0..2.0));
    let (p1, p2) = (rng.random_range(50.0..250.0), rng.random_range(8.0..40.0));
    let (a1, a2) = (rng.random_range(0.5..1.5), rng.random_range(0.1..0.6));
    let (phi1, phi2) = (rng.random_range(0.0..tau), rng.random_range(0.0..tau));
    let sigma = rng.random_range(0.05..0.3);
    let amplitude = a1 + a2;

    let mut noise_gain = vec![1.0; n];
    let mut offset = vec![0.0; n];

    let count = rng.random_range(2..=3usize);
    let width = (n / 10 / count).max(2);
    let onsets = place_onsets(&mut rng, n, count, width);
    let mut anomalies = Vec::with_capacity(count);
    for &onset in &onsets {
        let kind = match rng.random_range(0..3) {
            0 => AnomalyKind::Spike,
            1 => AnomalyKind::LevelShift,
            _ => AnomalyKind::VarianceBurst,
        };
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        match kind {
            AnomalyKind::Spike => {
                offset[onset] += sign * rng.random_range(2.0..3.5) * amplitude;
            }
            AnomalyKind::LevelShift => {
                let shift = sign * rng.random_range(1.0..1.8) * amplitude;
                let len = rng.random_range(40..120usize);
                for o in &mut offset[onset..(onset + len).min(n)] {
                    *o += shift;
                }
            }
            AnomalyKind::VarianceBurst => {
                let len = rng.random_range(50..100usize);
                let gain = rng.random_range(5.0..8.0);
                for g in &mut noise_gain[onset..(onset + len).min(n)] {
                    *g = gain;
                }
            }
        }
        anomalies.push(InjectedAnomaly { kind, onset });
    }

    let series = (0..n)
        .map(|t| {
            let tf = t as f64;
            let eps: f64 = rng.sample(StandardNormal);
            let clean = a1 * (tau * tf / p1 + phi1).sin() + a2 * (tau * tf / p2 + phi2).sin();
            let value = level + scale * (clean + offset[t] + sigma * noise_gain[t] * eps);
            SeriesPoint {
                timestamp: timestamp(t),
                value,
            }
        })
        .collect();

    let windows = onsets
        .iter()
        .map(|&onset| {
            let left = onset.saturating_sub(width / 2);
            let right = (onset + width / 2).min(n - 1);
            AnomalyWindow {
                start: timestamp(left),
                end: timestamp(right),
            }
        })
        .collect();

    SyntheticFile {
        name: format!("synthetic/synthetic_{index:02}.csv"),
        series,
        windows,
        anomalies,
    }
}

fn place_onsets(rng: &mut ChaCha8Rng, n: usize, count: usize, width: usize) -> Vec<usize> {
    let lo = n * 3 / 10;
    let hi = n - n / 20 - width;
    let gap = 2 * width;
    loop {
        let mut onsets: Vec<usize> = (0..count).map(|_| rng.random_range(lo..hi)).collect();
        onsets.sort_unstable();
        if onsets.windows(2).all(|w| w[1] - w[0] >= gap) {
            return onsets;
        }
    }
}

/// Writes every series under `root` and the label document to
/// `root/labels.json`, returning the label path.
pub fn write_corpus(files: &[SyntheticFile], root: impl AsRef<Path>) -> Result<PathBuf> {
    let root = root.as_ref();
    let mut labels = BTreeMap::new();
    for f in files {
        let path = root.join(&f.name);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let mut text = String::from("timestamp,value\n");
        for p in &f.series {
            text.push_str(&format!("{},{}\n", p.timestamp, p.value));
        }
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        labels.insert(f.name.clone(), f.windows.clone());
    }
    let label_path = root.join("labels.json");
    std::fs::write(&label_path, windows_to_json(&labels)).map_err(|e| Error::io(&label_path, e))?;
    Ok(label_path)
}
