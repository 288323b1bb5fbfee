use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::DVector;
use rollman_bench::{fixtures, probe_pair};
use rollman_core::controllability::holonomy_algebra;
use rollman_core::verify::bracket_gate;
use rollman_core::{larc, rol, roll, LarcOptions, ManifoldSpec};

fn bench_roll(c: &mut Criterion) {
    let mut group = c.benchmark_group("roll");
    for f in fixtures() {
        group.bench_function(BenchmarkId::from_parameter(f.name), |b| b.iter(|| roll(&f.pair, &f.q0, black_box(&f.control), 1e-3).unwrap()));
    }
    group.finish();
}

fn bench_rol(c: &mut Criterion) {
    let mut group = c.benchmark_group("rol");
    for f in fixtures() {
        let (x, y) = probe_pair(f.pair.n());
        group.bench_function(BenchmarkId::from_parameter(f.name), |b| b.iter(|| rol(&f.pair, &f.q0, black_box(&x), black_box(&y)).unwrap()));
    }
    group.finish();
}

fn bench_larc(c: &mut Criterion) {
    let mut group = c.benchmark_group("larc");
    group.sample_size(20);
    let opts = LarcOptions::default();
    for f in fixtures() {
        group.bench_function(BenchmarkId::from_parameter(f.name), |b| b.iter(|| larc(&f.pair, black_box(&f.q0), &opts).unwrap()));
    }
    group.finish();
}

fn bench_oracle(c: &mut Criterion) {
    let mut group = c.benchmark_group("bracket_gate");
    group.sample_size(10);
    let f = &fixtures()[1];
    group.bench_function("S3/S3(2) x4", |b| b.iter(|| bracket_gate(&f.pair, 4, black_box(7), LarcOptions::default().oracle_step).unwrap()));
    group.finish();
}

fn bench_holonomy(c: &mut Criterion) {
    let s3 = ManifoldSpec::sphere(3, 1.0);
    let x = DVector::zeros(3);
    let mut group = c.benchmark_group("holonomy");
    group.sample_size(10);
    group.bench_function("S3 x20", |b| b.iter(|| holonomy_algebra(&s3, &x, 20, black_box(1)).unwrap()));
    group.finish();
}

criterion_group!(benches, bench_roll, bench_rol, bench_larc, bench_oracle, bench_holonomy);
criterion_main!(benches);
