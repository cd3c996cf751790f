use std::hint::black_box;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, Criterion};
use polynash_core::exact::null_space_dense;
use polynash_core::*;

fn chicken() -> (Game, TsallisParams) {
    (make_chicken(), TsallisParams::new(3, 0.25).unwrap())
}

fn construction(c: &mut Criterion) {
    let (game, params) = chicken();
    let system = build_ne_mvp(&game, &params).unwrap();
    c.bench_function("build_ne_mvp/chicken", |b| b.iter(|| build_ne_mvp(black_box(&game), &params).unwrap()));
    c.bench_function("build_macaulay/chicken", |b| b.iter(|| build_macaulay(black_box(&system)).unwrap()));
    let m = build_macaulay(&system).unwrap();
    let x = vec![1.0; m.n_cols() * 8];
    c.bench_function("macaulay_mul_block/k8", |b| b.iter(|| m.mul_block(black_box(&x), 8)));
}

fn dense(c: &mut Criterion) {
    let (game, params) = chicken();
    let m = build_macaulay(&build_ne_mvp(&game, &params).unwrap()).unwrap();
    let mut group = c.benchmark_group("dense");
    group.sample_size(10);
    group.bench_function("null_space/chicken", |b| b.iter(|| null_space_dense(black_box(&m), 1e-8, 50_000_000).unwrap()));
    group.bench_function("solve_exact/chicken", |b| {
        b.iter(|| solve_exact(black_box(&game), &params, &ExactTolerances::default()).unwrap())
    });
    group.finish();
}

fn stochastic(c: &mut Criterion) {
    let (game, params) = chicken();
    let mut group = c.benchmark_group("stochastic");
    group.sample_size(10).measurement_time(Duration::from_secs(40));
    for (name, cfg) in [("full_batch", SolverConfig::full_batch()), ("bs_100", SolverConfig::batch_100())] {
        group.bench_function(name, |b| b.iter(|| solve_stochastic(black_box(&game), &params, &cfg).unwrap()));
    }
    group.finish();
}

fn least_squares(c: &mut Criterion) {
    let small = random_game(&[2, 2], 1).unwrap();
    let large = random_game(&[10, 10], 1).unwrap();
    c.bench_function("lstsq/2x2", |b| b.iter(|| solve_least_squares_2p(black_box(&small), 1.0).unwrap()));
    c.bench_function("lstsq/10x10", |b| b.iter(|| solve_least_squares_2p(black_box(&large), 1.0).unwrap()));
}

criterion_group!(benches, construction, dense, stochastic, least_squares);
criterion_main!(benches);
