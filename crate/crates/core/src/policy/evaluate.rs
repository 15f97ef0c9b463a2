//! Simulation and evaluation of a controller against a fixed adversary.

use super::chain::{build, solve_linear, step, Node};
use super::{Adversary, Controller, PolicyError};
use crate::model::RobustMdp;
use crate::sampling::{sample_index, stream_rng};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::hash::Hash;

/// Dense solves stay below this many augmented states.
pub const DEFAULT_LINEAR_CAP: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMethod {
    ExactTruncated,
    LinearSolve,
    MonteCarlo,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub value: f64,
    /// Sound bound for exact methods; 95% half-width for Monte Carlo.
    pub error_bound: f64,
    pub method: EvalMethod,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub augmented_states: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalOptions {
    /// Target error for the truncated recursion.
    pub eps: f64,
    pub linear_cap: usize,
    /// `Some` forces one exact method.
    pub method: Option<EvalMethod>,
}

impl EvalOptions {
    pub fn new(eps: f64) -> Self {
        EvalOptions { eps, linear_cap: DEFAULT_LINEAR_CAP, method: None }
    }
}

/// Smallest `T` with `gamma^T * 2 / (1 - gamma) <= eps`.
pub fn truncation_horizon(gamma: f64, eps: f64) -> usize {
    let t = ((eps * (1.0 - gamma) / 2.0).ln() / gamma.ln()).ceil();
    t.max(0.0) as usize
}

fn check_initial(model: &RobustMdp, mu: &[f64]) -> Result<Vec<usize>, PolicyError> {
    if mu.len() != model.n_states() || mu.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(PolicyError::Invalid("initial distribution must be a nonnegative row over states".into()));
    }
    let sum: f64 = mu.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(PolicyError::Invalid(format!("initial distribution sums to {sum}")));
    }
    Ok((0..mu.len()).filter(|&s| mu[s] > 0.0).collect())
}

/// Discounted value of `pi` against `kappa` from `mu`.
pub fn evaluate_exact<C, A>(model: &RobustMdp, pi: &C, kappa: &A, mu: &[f64], eps: f64) -> Result<EvalResult, PolicyError>
where
    C: Controller,
    A: Adversary,
{
    evaluate_exact_with(model, pi, kappa, mu, EvalOptions::new(eps))
}

pub fn evaluate_exact_with<C, A>(
    model: &RobustMdp,
    pi: &C,
    kappa: &A,
    mu: &[f64],
    opts: EvalOptions,
) -> Result<EvalResult, PolicyError>
where
    C: Controller,
    A: Adversary,
{
    let starts = check_initial(model, mu)?;
    let gamma = model.gamma;
    if opts.method != Some(EvalMethod::ExactTruncated) {
        if let Some(chain) = build(model, pi, kappa, &starts, opts.linear_cap) {
            if let Some((v, residual)) = solve_linear(&chain.reward, &chain.next, gamma) {
                let value = starts
                    .iter()
                    .map(|&s| mu[s] * v[chain.index[&(pi.initial_memory(), kappa.initial_memory(), s)]])
                    .sum();
                return Ok(EvalResult {
                    value,
                    error_bound: residual / (1.0 - gamma),
                    method: EvalMethod::LinearSolve,
                    horizon: None,
                    samples: None,
                    augmented_states: Some(chain.keys.len()),
                });
            }
        }
        if opts.method == Some(EvalMethod::LinearSolve) {
            return Err(PolicyError::TooLarge {
                what: "augmented chain".into(),
                count: opts.linear_cap as u128 + 1,
                cap: opts.linear_cap,
            });
        }
    }
    if !(opts.eps > 0.0) {
        return Err(PolicyError::Invalid("truncation target must be positive".into()));
    }
    let horizon = truncation_horizon(gamma, opts.eps);
    let value = truncated::<C, A>(model, pi, kappa, mu, &starts, horizon);
    Ok(EvalResult {
        value,
        error_bound: gamma.powi(horizon as i32) * 2.0 / (1.0 - gamma),
        method: EvalMethod::ExactTruncated,
        horizon: Some(horizon),
        samples: None,
        augmented_states: None,
    })
}

/// Forward recursion of the augmented state distribution for `horizon` steps.
fn truncated<C: Controller, A: Adversary>(
    model: &RobustMdp,
    pi: &C,
    kappa: &A,
    mu: &[f64],
    starts: &[usize],
    horizon: usize,
) -> f64
where
    Node<C, A>: Hash + Eq + Clone,
{
    let mut dist: Vec<(Node<C, A>, f64)> =
        starts.iter().map(|&s| ((pi.initial_memory(), kappa.initial_memory(), s), mu[s])).collect();
    let mut value = 0.0;
    let mut discount = 1.0;
    for _ in 0..horizon {
        let mut next: Vec<(Node<C, A>, f64)> = Vec::new();
        let mut index: HashMap<Node<C, A>, usize> = HashMap::new();
        let mut r = 0.0;
        for (node, w) in &dist {
            let (reward, succ) = step(model, pi, kappa, node);
            r += w * reward;
            for (key, p) in succ {
                match index.get(&key) {
                    Some(&j) => next[j].1 += w * p,
                    None => {
                        index.insert(key.clone(), next.len());
                        next.push((key, w * p));
                    }
                }
            }
        }
        value += discount * r;
        discount *= model.gamma;
        dist = next;
    }
    value
}

/// A sampled path `s_0, a_0, s_1, ..., s_T` with the rewards collected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
}

impl Trajectory {
    pub fn discounted_return(&self, gamma: f64) -> f64 {
        let mut d = 1.0;
        let mut total = 0.0;
        for r in &self.rewards {
            total += d * r;
            d *= gamma;
        }
        total
    }
}

/// Samples `horizon` steps with `rng`; one uniform draw for the initial
/// state, then one for each action and one for each transition.
/// Also returns the controller memory after the last update.
pub fn rollout<C, A, R>(
    model: &RobustMdp,
    pi: &C,
    kappa: &A,
    mu: &[f64],
    horizon: usize,
    rng: &mut R,
) -> (Trajectory, C::Memory)
where
    C: Controller,
    A: Adversary,
    R: Rng + ?Sized,
{
    let mut s = sample_index(mu, rng);
    let mut mc = pi.initial_memory();
    let mut ma = kappa.initial_memory();
    let mut traj = Trajectory {
        states: Vec::with_capacity(horizon + 1),
        actions: Vec::with_capacity(horizon),
        rewards: Vec::with_capacity(horizon),
    };
    traj.states.push(s);
    for _ in 0..horizon {
        let a = sample_index(&pi.decide(&mc, s), rng);
        let s2 = sample_index(kappa.row(&ma, s, a), rng);
        traj.actions.push(a);
        traj.rewards.push(model.reward(s, a));
        traj.states.push(s2);
        mc = pi.update(&mc, s, a, s2);
        ma = kappa.update(&ma, s, a, s2);
        s = s2;
    }
    (traj, mc)
}

/// A trajectory drawn from stream 0 of `seed`.
pub fn simulate<C, A>(model: &RobustMdp, pi: &C, kappa: &A, mu: &[f64], horizon: usize, seed: u64) -> Result<Trajectory, PolicyError>
where
    C: Controller,
    A: Adversary,
{
    check_initial(model, mu)?;
    Ok(rollout(model, pi, kappa, mu, horizon, &mut stream_rng(seed, 0)).0)
}

/// Mean of `n` truncated discounted returns; trajectory `i` uses stream `i`.
pub fn evaluate_mc<C, A>(
    model: &RobustMdp,
    pi: &C,
    kappa: &A,
    mu: &[f64],
    n: usize,
    eps: f64,
    seed: u64,
) -> Result<EvalResult, PolicyError>
where
    C: Controller + Sync,
    A: Adversary + Sync,
{
    check_initial(model, mu)?;
    if n < 2 {
        return Err(PolicyError::Invalid("Monte Carlo needs at least 2 trajectories".into()));
    }
    if !(eps > 0.0) {
        return Err(PolicyError::Invalid("truncation target must be positive".into()));
    }
    let horizon = truncation_horizon(model.gamma, eps);
    let returns: Vec<f64> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i);
            rollout(model, pi, kappa, mu, horizon, &mut rng).0.discounted_return(model.gamma)
        })
        .collect();
    let (mean, var) = if returns.iter().all(|&x| x == returns[0]) {
        (returns[0], 0.0)
    } else {
        let mean = returns.iter().sum::<f64>() / n as f64;
        (mean, returns.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64)
    };
    Ok(EvalResult {
        value: mean,
        error_bound: 1.96 * (var / n as f64).sqrt(),
        method: EvalMethod::MonteCarlo,
        horizon: Some(horizon),
        samples: Some(n),
        augmented_states: None,
    })
}
