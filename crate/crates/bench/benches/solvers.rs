use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rmdp::bellman::{lp_maxmin, solve_supinf};
use rmdp::dpp::{fixture, FixtureId};
use rmdp::learner::{communicating_fixture, explore, run_experiment, ExperimentConfig, HiddenKernel, SampleMode};
use rmdp::policy::{evaluate_exact, greedy_from_value, robust_evaluate};
use rmdp_bench::{first_vertex_kernel, payoffs, sa_model};

fn bellman(c: &mut Criterion) {
    let mut g = c.benchmark_group("solve_supinf");
    for ns in [4, 16, 64] {
        let model = sa_model(ns, 3, 3, 0.9, 7);
        g.bench_with_input(BenchmarkId::from_parameter(ns), &model, |b, m| b.iter(|| solve_supinf(black_box(m), 1e-9).unwrap()));
    }
    g.finish();

    let mut g = c.benchmark_group("lp_maxmin");
    for n in [2, 8, 32] {
        let p = payoffs(n, n, 11);
        g.bench_with_input(BenchmarkId::from_parameter(n), &p, |b, p| b.iter(|| lp_maxmin(black_box(p)).unwrap()));
    }
    g.finish();
}

fn policy(c: &mut Criterion) {
    let model = sa_model(16, 3, 2, 0.9, 3);
    let u = solve_supinf(&model, 1e-9).unwrap().fixed_point;
    let pi = greedy_from_value(&model, &u.0).unwrap();
    let kappa = first_vertex_kernel(&model);
    let mu = vec![1.0 / 16.0; 16];
    c.bench_function("evaluate_exact/16", |b| b.iter(|| evaluate_exact(&model, &pi, &kappa, &mu, 1e-10).unwrap()));
    c.bench_function("robust_evaluate/16", |b| b.iter(|| robust_evaluate(&model, &pi, &mu, 1e-9).unwrap()));

    let f = fixture(FixtureId::LearnThenCommit, 0.9).unwrap();
    c.bench_function("robust_evaluate/learn_then_commit", |b| {
        b.iter(|| robust_evaluate(&f.model, &f.witnesses[0].policy, &f.initial, 1e-9).unwrap())
    });
}

fn learner(c: &mut Criterion) {
    let model = communicating_fixture(0.9);
    let env = HiddenKernel::new(first_vertex_kernel(&model));
    let mu = vec![1.0, 0.0, 0.0, 0.0];
    c.bench_function("explore/4096", |b| b.iter(|| explore(&env, &mu, 4096, 4, black_box(5)).unwrap()));

    let cfg = ExperimentConfig::new(vec![0.9], (0..4).collect(), SampleMode::Practical { c: 50 }, mu.clone());
    let mut g = c.benchmark_group("experiment");
    g.sample_size(10);
    g.bench_function("gamma_0.9", |b| b.iter(|| run_experiment(&model, &cfg).unwrap()));
    g.finish();
}

criterion_group!(benches, bellman, policy, learner);
criterion_main!(benches);
