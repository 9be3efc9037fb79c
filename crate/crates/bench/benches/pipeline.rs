//! Criterion benchmarks for the hot paths: encoding-model fit and decode,
//! design construction, PCA, SSIM and the statistics battery.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use latdec_core::design::build_design;
use latdec_core::eval;
use latdec_core::latent;
use latdec_core::sim::{self, PatternSource, SimConfig};
use latdec_core::stats;
use latdec_core::Matrix;

fn bench_config() -> SimConfig {
    SimConfig {
        n_train_stimuli: 200,
        n_test_stimuli: 20,
        n_latent_dims: 32,
        n_voxels: 400,
        noise_sigma: 1.0,
        test_repeats: 4,
        seed: 9,
        ..SimConfig::default()
    }
}

fn bench_simulate(c: &mut Criterion) {
    let cfg = bench_config();
    c.bench_function("simulate_subject", |b| {
        b.iter(|| sim::simulate_subject(black_box(&cfg)).unwrap())
    });
}

fn bench_design(c: &mut Criterion) {
    let cfg = bench_config();
    let out = sim::simulate_subject(&cfg).unwrap();
    c.bench_function("build_design", |b| {
        b.iter(|| {
            build_design(
                black_box(&out.trials),
                &out.truth.train_latents,
                out.bold.n_observations(),
                cfg.tr_s,
                true,
            )
            .unwrap()
        })
    });
}

fn bench_fit_decode(c: &mut Criterion) {
    let cfg = bench_config();
    let out = sim::simulate_subject(&cfg).unwrap();
    c.bench_function("fit_and_decode", |b| {
        b.iter(|| {
            sim::fit_and_decode(
                black_box(&out.trials),
                &out.truth.train_latents,
                &out.bold,
                cfg.tr_s,
                0.0,
                PatternSource::Beta,
            )
            .unwrap()
        })
    });
}

fn bench_pca(c: &mut Criterion) {
    let data = Matrix::from_fn(256, 128, |i, j| {
        ((i * 31 + j * 17) as f64 * 0.37).sin()
    });
    c.bench_function("pca_fit_256x128_k64", |b| {
        b.iter_batched(
            || data.clone(),
            |d| latent::pca_fit(&d, 64).unwrap(),
            BatchSize::LargeInput,
        )
    });
}

fn bench_ssim(c: &mut Criterion) {
    let a = Matrix::from_fn(128, 128, |i, j| ((i + j) as f64 * 0.05).sin() * 0.5 + 0.5);
    let b_img = Matrix::from_fn(128, 128, |i, j| ((i * j) as f64 * 0.001).cos() * 0.5 + 0.5);
    c.bench_function("ssim_128x128", |b| {
        b.iter(|| eval::ssim(black_box(&a), black_box(&b_img), 1.0).unwrap())
    });
}

fn bench_stats(c: &mut Criterion) {
    c.bench_function("monte_carlo_pairwise_100k", |b| {
        b.iter(|| stats::monte_carlo_pairwise_p(black_box(0.85), 20, 20, 100_000, 5).unwrap())
    });
    c.bench_function("enumerate_group_20_pow_4", |b| {
        b.iter(|| stats::enumerate_group_pairwise_p(black_box(&[3, 5, 2, 8]), 20).unwrap())
    });
    let blocks = Matrix::from_fn(4, 3, |i, j| ((i * 7 + j * 3) as f64 * 0.61).sin());
    c.bench_function("friedman_4x3", |b| {
        b.iter(|| stats::friedman_test(black_box(&blocks)).unwrap())
    });
}

criterion_group!(
    benches,
    bench_simulate,
    bench_design,
    bench_fit_decode,
    bench_pca,
    bench_ssim,
    bench_stats
);
criterion_main!(benches);
