use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};
use vpfp_bench::small_nonlinear_config;
use vpfp_core::kernel::eval_g1;
use vpfp_core::mode_ops::{ModeKind, ModeOperator};
use vpfp_core::nonlinear::RadialSolver;
use vpfp_core::radial::{radial_reconstruct, HankelMatrices, ModeGrid};
use vpfp_core::{BasisSpec, C64};

fn mode_operators(c: &mut Criterion) {
    let basis = Arc::new(BasisSpec::build(8).unwrap());
    c.bench_function("assemble B(xi) N=8", |b| b.iter(|| ModeOperator::assemble(ModeKind::B, black_box(1.3), basis.clone()).unwrap()));
    let op = ModeOperator::assemble(ModeKind::B, 1.3, basis.clone()).unwrap();
    c.bench_function("spectrum B(xi) N=8", |b| b.iter(|| op.spectrum().unwrap()));
    c.bench_function("semigroup e^{tB} N=8", |b| b.iter(|| op.semigroup(black_box(2.0)).unwrap()));
}

fn kernel(c: &mut Criterion) {
    c.bench_function("eval_g1", |b| b.iter(|| eval_g1(black_box(1.5), [1.0, 0.5, 0.0], [0.3, 0.0, 1.0], [0.0; 3], [0.0, 1.0, 0.0]).unwrap()));
}

fn hankel(c: &mut Criterion) {
    let grid = ModeGrid::new(20.0, 0.5, 8, 1.0).unwrap();
    let g_hat: Vec<C64> = grid.nodes.iter().map(|&r| C64::new((-r * r).exp(), 0.0)).collect();
    let x: Vec<f64> = (1..=64).map(|i| i as f64 * 0.5).collect();
    c.bench_function("radial reconstruct 64 points", |b| b.iter(|| radial_reconstruct(&grid, black_box(&g_hat), &x).unwrap()));
    c.bench_function("Hankel matrices l<=4", |b| b.iter(|| HankelMatrices::build(&grid, black_box(&x), 4)));
}

fn nonlinear_step(c: &mut Criterion) {
    let mut solver = RadialSolver::new(small_nonlinear_config()).unwrap();
    let u0 = solver.initial_state();
    let dt = solver.config.dt;
    c.bench_function("nonlinear step N=4", |b| b.iter(|| solver.evolve(black_box(&u0), dt, dt).unwrap()));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = mode_operators, kernel, hankel, nonlinear_step
}
criterion_main!(benches);
