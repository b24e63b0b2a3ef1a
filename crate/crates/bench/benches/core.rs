use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use pencil_core::nodal::{check_admissibility, isolate_real_roots, CrackConfig, Equation, DEFAULT_RANK_TOL, DEFAULT_ROOT_TOL};
use pencil_core::pencil::{pencil_residual, quadratic_eigenfunction, quartic_eigenfunction};
use pencil_core::semilinear::{solve_selfsimilar, solve_stationary, FarCondition, Symmetry};

fn eigenfunctions(c: &mut Criterion) {
    c.bench_function("quadratic eigenfunction l=40", |b| b.iter(|| quadratic_eigenfunction(black_box(40), 1).unwrap()));
    c.bench_function("quartic eigenfunction l=20 family 3", |b| b.iter(|| quartic_eigenfunction(black_box(20), 3).unwrap()));
    let pair = quartic_eigenfunction(20, 3).unwrap();
    c.bench_function("quartic residual l=20", |b| b.iter(|| pencil_residual(black_box(&pair))));
}

fn roots(c: &mut Criterion) {
    let psi = quadratic_eigenfunction(50, 1).unwrap().psi;
    c.bench_function("isolate roots l=50", |b| b.iter(|| isolate_real_roots(black_box(&psi), DEFAULT_ROOT_TOL).unwrap()));
    let config = CrackConfig::from_ints(&[-1, 0, 1]).unwrap();
    c.bench_function("admissibility l<=12", |b| {
        b.iter(|| check_admissibility(Equation::Laplace, black_box(&config), 3, 12, DEFAULT_RANK_TOL).unwrap())
    });
}

fn profiles(c: &mut Criterion) {
    let mut g = c.benchmark_group("profiles");
    g.sample_size(10);
    g.bench_function("stationary symmetric decay", |b| {
        b.iter(|| solve_stationary(black_box(3.0), Symmetry::Symmetric, FarCondition::DecayInverse, 1e-10).unwrap())
    });
    g.bench_function("selfsimilar to 1e-2", |b| b.iter(|| solve_selfsimilar(black_box(3.0), 1.0, 100.0, 1e-2, 1e-10).unwrap()));
    g.finish();
}

criterion_group!(benches, eigenfunctions, roots, profiles);
criterion_main!(benches);
