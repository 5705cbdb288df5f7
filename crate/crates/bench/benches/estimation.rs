use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mdpde::asymptotics::{model_matrices_at, model_stationary, sensitivity};
use mdpde::chain::{count_transitions, simulate_chain};
use mdpde::dpd::estimate;
use mdpde::models::{binomial_walk, multi_binomial_walk};
use mdpde::{DpdConfig, ParametricFamily};

fn bench_estimate(c: &mut Criterion) {
    let mut group = c.benchmark_group("estimate");
    let scalar = binomial_walk(10).unwrap();
    let multi = multi_binomial_walk(8).unwrap();
    let multi_theta = [0.7, 0.6, 0.5, 0.5, 0.4, 0.3];
    let scalar_emp = count_transitions(&simulate_chain(&scalar.matrix(&[0.25]).unwrap(), 0, 2000, 1).unwrap())
        .unwrap()
        .empirical()
        .unwrap();
    let multi_emp = count_transitions(&simulate_chain(&multi.matrix(&multi_theta).unwrap(), 0, 2000, 2).unwrap())
        .unwrap()
        .empirical()
        .unwrap();
    for alpha in [0.0, 0.5, 1.0] {
        let cfg = DpdConfig::with_alpha(alpha);
        group.bench_with_input(BenchmarkId::new("binomial-walk-10", alpha), &cfg, |b, cfg| {
            b.iter(|| estimate(&scalar, black_box(&scalar_emp), cfg).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("multi-binomial-walk-8", alpha), &cfg, |b, cfg| {
            b.iter(|| estimate(&multi, black_box(&multi_emp), cfg).unwrap())
        });
    }
    group.finish();
}

fn bench_asymptotics(c: &mut Criterion) {
    let family = multi_binomial_walk(8).unwrap();
    let theta = [0.7, 0.6, 0.5, 0.5, 0.4, 0.3];
    c.bench_function("model_matrices/multi-binomial-walk-8", |b| {
        b.iter(|| model_matrices_at(&family, black_box(&theta), 0.5).unwrap())
    });

    let mut group = c.benchmark_group("sensitivity");
    for k in [5, 8, 12] {
        let family = binomial_walk(k).unwrap();
        let p = family.matrix(&[0.25]).unwrap();
        let w = model_stationary(&family, &[0.25]).unwrap();
        group.bench_with_input(BenchmarkId::new("binomial-walk", k), &k, |b, _| {
            b.iter(|| sensitivity(&family, black_box(&[0.25]), &p, &w, 0.5).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_estimate, bench_asymptotics);
criterion_main!(benches);
