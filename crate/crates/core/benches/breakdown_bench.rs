//! Benchmarks for the numeric kernels, the estimator functionals, and the
//! grid image scan, with the parallel and sequential execution paths
//! measured side by side.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use ar1_breakdown::breakdown::{badness_set, ProcessFamily};
use ar1_breakdown::estimators::{
    asymptotic_functional, dr_functional, lms_functional, ols_functional, EstimatorKind,
    FunctionalConfig, FunctionalInput, LmsConfig,
};
use ar1_breakdown::exec;
use ar1_breakdown::specfun::{
    noncentral_chisq_cdf, normal_quantile, ratio_normal_cdf, NoncentralChiSqArgs, RatioNormalArgs,
};

fn bench_specfun(c: &mut Criterion) {
    let mut g = c.benchmark_group("specfun");
    let nc = NoncentralChiSqArgs::new(4.0, 1.0).unwrap();
    g.bench_function("noncentral_chisq_cdf", |b| {
        b.iter(|| noncentral_chisq_cdf(black_box(3.5), &nc).unwrap())
    });
    let ratio = RatioNormalArgs::new(0.4, 1.0, 1.25, 0.6).unwrap();
    g.bench_function("ratio_normal_cdf", |b| {
        b.iter(|| ratio_normal_cdf(black_box(0.3), &ratio).unwrap())
    });
    g.bench_function("normal_quantile", |b| {
        b.iter(|| normal_quantile(black_box(0.975)).unwrap())
    });
    g.finish();
}

fn bench_functionals(c: &mut Criterion) {
    let mut g = c.benchmark_group("functionals");
    g.sample_size(20);
    let input = FunctionalInput::new(0.5, 0.25, 100.0).unwrap();
    g.bench_function("ols_closed_form", |b| {
        b.iter(|| ols_functional(black_box(&input)))
    });
    g.bench_function("dr_root", |b| {
        b.iter(|| dr_functional(black_box(&input), 1e-10).unwrap())
    });
    let small = LmsConfig {
        theta_tilde_grid: 201,
        ..LmsConfig::default()
    };
    g.bench_function("lms_argmin_201", |b| {
        b.iter(|| lms_functional(black_box(&input), &small).unwrap())
    });
    g.finish();
}

fn bench_image_scan(c: &mut Criterion) {
    let mut g = c.benchmark_group("image_scan");
    g.sample_size(10);
    let cfg = FunctionalConfig::default();
    let grid: Vec<f64> = (0..401)
        .map(|i| -0.98 + 1.96 * i as f64 / 400.0)
        .collect();
    let eval = move |theta: &f64| {
        let input = FunctionalInput::new(*theta, 0.25, 1e4).unwrap();
        asymptotic_functional(EstimatorKind::Dr, &input, &cfg).unwrap()
    };
    g.bench_with_input(
        BenchmarkId::new("dr_grid_401", "parallel"),
        &grid,
        |b, grid| b.iter(|| exec::map_slice(black_box(grid), eval)),
    );
    g.bench_with_input(
        BenchmarkId::new("dr_grid_401", "sequential"),
        &grid,
        |b, grid| b.iter(|| exec::map_slice_seq(black_box(grid), eval)),
    );
    let family = ProcessFamily::with_grid(-0.9999, 0.9999, 801).unwrap();
    g.bench_function("badness_set_dr_801", |b| {
        b.iter(|| badness_set(EstimatorKind::Dr, &family, 0.25, 1e4, &cfg).unwrap())
    });
    g.finish();
}

criterion_group!(benches, bench_specfun, bench_functionals, bench_image_scan);
criterion_main!(benches);
