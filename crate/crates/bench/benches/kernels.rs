use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use twistqkd::bounds::choose_params;
use twistqkd::protocol::run_ppp;
use twistqkd::qmath::{herm_eig, TensorLayout};
use twistqkd::twist::{decompose, gamma_x};
use twistqkd_bench::{hermitian, small_run, twisting};

fn eigensolver(c: &mut Criterion) {
    let mut g = c.benchmark_group("herm_eig");
    for dim in [4, 16, 64] {
        let m = hermitian(dim, dim as u64);
        g.bench_with_input(BenchmarkId::from_parameter(dim), &m, |b, m| b.iter(|| herm_eig(black_box(m)).unwrap()));
    }
    g.finish();
}

fn pauli_decomposition(c: &mut Criterion) {
    let gx = gamma_x(&twisting(3)).unwrap();
    let layout = TensorLayout::abab();
    c.bench_function("decompose gamma_x", |b| b.iter(|| decompose(black_box(&gx), &layout).unwrap()));
}

fn solver(c: &mut Criterion) {
    c.bench_function("choose_params n=1e18", |b| {
        b.iter(|| choose_params(40, 0.05, 2, 4, black_box(1_000_000_000_000_000_000)).unwrap())
    });
}

fn protocol(c: &mut Criterion) {
    let cfg = small_run(20_000);
    let mut g = c.benchmark_group("run_ppp");
    g.sample_size(10);
    g.bench_function("n=2e4", |b| b.iter(|| run_ppp(black_box(&cfg)).unwrap()));
    g.finish();
}

criterion_group!(benches, eigensolver, pauli_decomposition, solver, protocol);
criterion_main!(benches);
