//! Sequential vs rayon-parallel timings for the row-parallel kernels.
//!
//! Build with `--no-default-features` to confirm the parallel arm falls back
//! to the sequential code.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use trojanscope::embedding::{
    pairwise_affinities_with, silhouette_with, tsne_with, EmbeddingSet, TsneConfig,
};
use trojanscope::stats::{gaussian_kde_with, Bandwidth, DeltaSeries, SeriesMode};
use trojanscope::synthetic::{gaussian_blobs, null_scenario};
use trojanscope::Exec;

const POLICIES: [(&str, Exec); 2] = [
    ("sequential", Exec::Sequential),
    ("parallel", Exec::Parallel),
];

fn kde(c: &mut Criterion) {
    let (m, _) = null_scenario(100_000, 1, 0.5, 1);
    let s = DeltaSeries::new(m.into_values(), SeriesMode::Delta);
    let mut g = c.benchmark_group("kde_100k_x512");
    for (name, exec) in POLICIES {
        g.bench_function(name, |b| {
            b.iter(|| gaussian_kde_with(black_box(&s), Bandwidth::Silverman, 512, exec).unwrap())
        });
    }
    g.finish();
}

fn affinities(c: &mut Criterion) {
    let (m, _) = null_scenario(500, 64, 0.5, 2);
    let mut g = c.benchmark_group("affinities_500x64");
    for (name, exec) in POLICIES {
        g.bench_function(name, |b| {
            b.iter(|| pairwise_affinities_with(black_box(&m), 30.0, exec).unwrap())
        });
    }
    g.finish();
}

fn tsne(c: &mut Criterion) {
    let (m, _) = gaussian_blobs(&[100, 100, 100], 16, 5.0, 1.0, 3);
    let e = EmbeddingSet::unlabeled(m).unwrap();
    let cfg = TsneConfig {
        iterations: 50,
        exaggeration_iters: 25,
        ..TsneConfig::default()
    };
    let mut g = c.benchmark_group("tsne_300pts_50iters");
    g.sample_size(10);
    for (name, exec) in POLICIES {
        g.bench_function(name, |b| {
            b.iter(|| tsne_with(black_box(&e), &cfg, exec).unwrap())
        });
    }
    g.finish();
}

fn silhouette(c: &mut Criterion) {
    let mut g = c.benchmark_group("silhouette");
    for n in [500usize, 2000] {
        let (m, labels) = gaussian_blobs(&[n / 4; 4], 2, 5.0, 1.0, 4);
        for (name, exec) in POLICIES {
            g.bench_with_input(BenchmarkId::new(name, n), &n, |b, _| {
                b.iter(|| silhouette_with(black_box(&m), &labels, exec).unwrap())
            });
        }
    }
    g.finish();
}

criterion_group!(benches, kde, affinities, tsne, silhouette);
criterion_main!(benches);
