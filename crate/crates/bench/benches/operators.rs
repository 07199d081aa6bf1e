use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use isomesh::discrete_ops::{delta_star, laplacian, moment_map_r, spectral_gap, SpectralOptions};
use isomesh::flow_engine::flow_step;
use isomesh::isoperturb::{green_apply, GreenConfig};
use isomesh::pyramid_refine::{refine, DEFAULT_TOL};
use isomesh::FaceFunction;
use isomesh_bench::{sample, smooth_face_function};

fn operators(c: &mut Criterion) {
    let mut group = c.benchmark_group("operators");
    for n_res in [16, 32, 64] {
        let tau = sample("bumped-product", n_res);
        let phi = smooth_face_function(&tau);
        group.bench_with_input(BenchmarkId::new("moment_map_r", n_res), &tau, |b, tau| {
            b.iter(|| moment_map_r(black_box(tau)))
        });
        group.bench_with_input(BenchmarkId::new("delta_star", n_res), &phi, |b, phi| {
            b.iter(|| delta_star(&tau, black_box(phi)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("laplacian", n_res), &phi, |b, phi| {
            b.iter(|| laplacian(&tau, black_box(phi)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("flow_step", n_res), &tau, |b, tau| {
            b.iter(|| flow_step(black_box(tau), 0.5 / (n_res * n_res) as f64).unwrap())
        });
    }
    group.finish();
}

fn solvers(c: &mut Criterion) {
    let mut group = c.benchmark_group("solvers");
    group.sample_size(10);
    for n_res in [16, 32] {
        let tau = sample("product", n_res);
        let phi = smooth_face_function(&tau);
        let cfg = GreenConfig::default();
        group.bench_with_input(BenchmarkId::new("green_apply", n_res), &phi, |b, phi| {
            b.iter(|| green_apply(&tau, black_box(phi), &cfg).unwrap())
        });
        let ones = [FaceFunction::ones(tau.grid().clone())];
        group.bench_with_input(BenchmarkId::new("spectral_gap", n_res), &tau, |b, tau| {
            b.iter(|| spectral_gap(black_box(tau), &ones, SpectralOptions::default()).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("refine", n_res), &tau, |b, tau| {
            b.iter(|| refine(black_box(tau), DEFAULT_TOL).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, operators, solvers);
criterion_main!(benches);
