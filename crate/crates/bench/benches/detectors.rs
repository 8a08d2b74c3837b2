use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use icad_bench::{file, series};
use icad_core::{
    detect_stream, embed_series, threshold_sweep, ApplicationProfile, EmbeddedVector, FileTrace,
    FittedNcm, IcadConfig, NcmKind, ReferenceSet,
};

const KINDS: [NcmKind; 3] = [
    NcmKind::Knn { k: 27 },
    NcmKind::Lof { k: 27 },
    NcmKind::Loop { k: 27, lambda: 3.0 },
];

fn reference(window: usize, size: usize) -> (ReferenceSet, Vec<EmbeddedVector>) {
    let points = series(size + 200 + window, 1);
    let mut columns = embed_series(&points, window).unwrap().into_columns();
    let queries = columns.split_off(size);
    (ReferenceSet::fit(columns, 0.1).unwrap(), queries)
}

fn scoring(c: &mut Criterion) {
    let mut group = c.benchmark_group("score");
    let (set, queries) = reference(16, 512);
    for kind in KINDS {
        let model = FittedNcm::fit(set.clone(), kind).unwrap();
        group.bench_function(BenchmarkId::new(kind.name(), "T512_L16"), |b| {
            let mut i = 0;
            b.iter(|| {
                i = (i + 1) % queries.len();
                black_box(model.score(&queries[i]).unwrap())
            })
        });
    }
    group.finish();
}

fn fitting(c: &mut Criterion) {
    let mut group = c.benchmark_group("fit");
    group.sample_size(20);
    for size in [128, 512] {
        let (set, _) = reference(16, size);
        for kind in KINDS {
            group.bench_with_input(BenchmarkId::new(kind.name(), size), &set, |b, set| {
                b.iter(|| FittedNcm::fit(black_box(set.clone()), kind).unwrap())
            });
        }
    }
    group.finish();
}

fn streaming(c: &mut Criterion) {
    let mut group = c.benchmark_group("detect_stream");
    group.sample_size(10);
    let points = series(3000, 2);
    for kind in KINDS {
        let config = IcadConfig {
            ncm: kind,
            ..IcadConfig::default()
        };
        group.bench_function(BenchmarkId::new(kind.name(), 3000), |b| {
            b.iter(|| detect_stream(black_box(&points), config).unwrap())
        });
    }
    group.finish();
}

fn sweeping(c: &mut Criterion) {
    let traces: Vec<FileTrace> = (0..10)
        .map(|f| {
            let labelled = file(3000, f);
            let records = detect_stream(&labelled.series, IcadConfig::default()).unwrap();
            FileTrace {
                name: labelled.name,
                timestamps: labelled.series.iter().map(|p| p.timestamp).collect(),
                likelihoods: records.iter().map(|r| r.likelihood).collect(),
                windows: labelled.windows,
            }
        })
        .collect();
    c.bench_function("threshold_sweep/10x3000", |b| {
        b.iter(|| threshold_sweep(black_box(&traces), &ApplicationProfile::STANDARD).unwrap())
    });
}

criterion_group!(benches, scoring, fitting, streaming, sweeping);
criterion_main!(benches);
