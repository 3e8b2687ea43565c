use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use polystab_core::acoustic_model::build_acoustic_discretization;
use polystab_core::spectral_model::{expand, webster_basis};
use polystab_core::truncation_verify::{assemble_wave, resolvent_sweep, uniform_grid, Damping};

fn webster_sweep(c: &mut Criterion) {
    let grid = uniform_grid(1.0, 50.0, 0.5);
    let mut group = c.benchmark_group("resolvent_sweep/webster");
    group.sample_size(10);
    for n in [50, 100, 200] {
        let basis = webster_basis(2.0, n).unwrap();
        let d = expand(|p| 1.0 - p[0], &basis, n, 4 * n + 64).unwrap();
        let sys = assemble_wave(&basis, &Damping::WeakRankOne(d), n, 2.0).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &sys, |b, sys| {
            b.iter(|| resolvent_sweep(black_box(sys), &grid, 0).unwrap())
        });
    }
    group.finish();
}

fn acoustic_sweep(c: &mut Criterion) {
    let grid = uniform_grid(1.0, 50.0, 0.5);
    let disc = build_acoustic_discretization(128, 1.0, 1.0).unwrap();
    let mut group = c.benchmark_group("resolvent_sweep/acoustic");
    group.sample_size(10);
    group.bench_function("128", |b| b.iter(|| resolvent_sweep(black_box(&disc.system), &grid, 2).unwrap()));
    group.finish();
}

criterion_group!(benches, webster_sweep, acoustic_sweep);
criterion_main!(benches);
