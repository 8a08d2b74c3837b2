//! Shared fixtures for the criterion benchmarks.

use icad_core::synthetic::{generate_corpus, CorpusSpec, SyntheticFile};
use icad_core::SeriesPoint;

/// One labelled synthetic file of `length` points.
pub fn file(length: usize, seed: u64) -> SyntheticFile {
    generate_corpus(CorpusSpec {
        files: 1,
        length,
        seed,
    })
    .remove(0)
}

pub fn series(length: usize, seed: u64) -> Vec<SeriesPoint> {
    file(length, seed).series
}
