//! Seeded instances shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rmdp::model::{Ambiguity, ControllerSet, DistributionSet, Kernel, Row, RobustMdp};

fn row(rng: &mut impl Rng, n: usize) -> Row {
    let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-3).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

/// An SA-rectangular model with `k` hull vertices per pair.
pub fn sa_model(n_states: usize, n_actions: usize, k: usize, gamma: f64, seed: u64) -> RobustMdp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rewards = (0..n_states * n_actions).map(|_| rng.random::<f64>()).collect();
    let sets = (0..n_states * n_actions)
        .map(|_| DistributionSet::hull((0..k).map(|_| row(&mut rng, n_states)).collect()))
        .collect();
    RobustMdp::new(
        (0..n_states).map(|s| format!("s{s}")).collect(),
        (0..n_actions).map(|a| format!("a{a}")).collect(),
        rewards,
        gamma,
        Ambiguity::Sa(sets),
        ControllerSet::simplex(),
    )
    .expect("generated model is valid")
}

/// Random payoff matrix for the matrix game solver.
pub fn payoffs(rows: usize, cols: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..rows).map(|_| (0..cols).map(|_| rng.random::<f64>()).collect()).collect()
}

/// The kernel that picks the first vertex of every pair's set.
pub fn first_vertex_kernel(model: &RobustMdp) -> Kernel {
    let rows: Vec<Row> = match &model.ambiguity {
        Ambiguity::Sa(sets) => sets.iter().map(|p| p.vertices[0].clone()).collect(),
        Ambiguity::S(sets) => sets.iter().flat_map(|p| p.vertices[0].clone()).collect(),
        Ambiguity::General(p) => p.vertices[0].clone(),
    };
    Kernel::from_rows(model.n_states(), model.n_actions(), &rows).expect("vertex rows are distributions")
}
