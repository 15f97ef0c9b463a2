//! Explore-then-exploit learning against a hidden time-homogeneous adversary.

mod diameter;
mod ete;
mod experiment;
mod explore;
mod fixture;

pub use diameter::{exact_diameter, uniform_hitting_bound, Diameter};
pub use ete::{EteMemory, EtePolicy, ExploitRules, DEFAULT_COUNTER_CAP};
pub use experiment::{run_experiment, ExperimentConfig, GapRow, GapSummary, GapTable, DiameterSource};
pub use explore::{check_schedule_order, explore, Environment, Exploration, ExplorationState, HiddenKernel, TraceStep};
pub use fixture::communicating_fixture;

use crate::bellman::{default_iteration_cap, BellmanError, ValueFn};
use crate::model::{unit, ModelError, Row};
use crate::policy::{FiniteMemoryPolicy, PolicyError};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LearnerError {
    #[error("invalid learner input: {0}")]
    Invalid(String),
    #[error("value iteration stopped after {iterations} iterations with residual {residual:e}")]
    IterationCap { iterations: usize, residual: f64 },
    #[error("{count} sample counters exceed the cap of {cap}")]
    TooLarge { count: u128, cap: usize },
    #[error("kernel {vertex} is not communicating")]
    NotCommunicating { vertex: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Bellman(#[from] BellmanError),
}

/// How the per-pair sample count is chosen from the exploration period.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SampleMode {
    /// `n / (8 |Z| D^3 |A|^D)`, rounded down.
    Paper,
    /// `max(1, n / c)`, rounded down.
    Practical { c: u64 },
}

impl fmt::Display for SampleMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SampleMode::Paper => f.write_str("paper"),
            SampleMode::Practical { c } => write!(f, "practical:{c}"),
        }
    }
}

impl FromStr for SampleMode {
    type Err = LearnerError;

    fn from_str(s: &str) -> Result<Self, LearnerError> {
        if s == "paper" {
            return Ok(SampleMode::Paper);
        }
        let c = s
            .strip_prefix("practical:")
            .and_then(|c| c.parse::<u64>().ok())
            .ok_or_else(|| LearnerError::Invalid(format!("expected paper or practical:C, found {s:?}")))?;
        if c == 0 {
            return Err(LearnerError::Invalid("practical mode needs c >= 1".into()));
        }
        Ok(SampleMode::Practical { c })
    }
}

/// `8 |Z| D^3 |A|^D`, or `None` on overflow.
pub fn paper_denominator(d: u64, n_states: u64, n_actions: u64) -> Option<u128> {
    let z = (n_states as u128).checked_mul(n_actions as u128)?;
    let pow = (n_actions as u128).checked_pow(u32::try_from(d).ok()?)?;
    8u128.checked_mul(z)?.checked_mul((d as u128).checked_pow(3)?)?.checked_mul(pow)
}

/// Samples collected per state-action pair.
pub fn effective_sample_size(n: u64, d: u64, n_states: usize, n_actions: usize, mode: SampleMode) -> Result<u64, LearnerError> {
    if n == 0 || d == 0 {
        return Err(LearnerError::Invalid("n and D must be at least 1".into()));
    }
    Ok(match mode {
        SampleMode::Paper => match paper_denominator(d, n_states as u64, n_actions as u64) {
            Some(den) => (n as u128 / den) as u64,
            None => 0,
        },
        SampleMode::Practical { c } => {
            if c == 0 {
                return Err(LearnerError::Invalid("practical mode needs c >= 1".into()));
            }
            (n / c).max(1)
        }
    })
}

/// Exploration period after which every pair is sampled with probability at least `1 - delta`:
/// `(4 D |Z| + 2 ln(1/delta)) D (D + 1) |A|^D`, rounded up.
pub fn exploration_threshold(d: u64, n_states: usize, n_actions: usize, delta: f64) -> Result<u64, LearnerError> {
    if !(delta > 0.0 && delta < 1.0) || d == 0 {
        return Err(LearnerError::Invalid("need D >= 1 and delta in (0, 1)".into()));
    }
    let z = (n_states * n_actions) as f64;
    let d = d as f64;
    let n = (4.0 * d * z + 2.0 * (1.0 / delta).ln()) * d * (d + 1.0) * (n_actions as f64).powf(d);
    if !n.is_finite() || n >= u64::MAX as f64 {
        return Err(LearnerError::Invalid("exploration threshold overflows".into()));
    }
    Ok(n.ceil() as u64)
}

/// Frequencies of the collected samples, or point masses at the own state when
/// some pair is incomplete.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EmpiricalKernel {
    pub n_states: usize,
    pub n_actions: usize,
    pub m: u64,
    pub success: bool,
    /// Indexed `s * |A| + a`.
    pub rows: Vec<Row>,
}

impl EmpiricalKernel {
    pub fn from_samples(n_states: usize, n_actions: usize, m: u64, samples: &[Vec<u32>]) -> Self {
        let success = m >= 1 && samples.len() == n_states * n_actions && samples.iter().all(|v| v.len() as u64 == m);
        let rows = (0..n_states * n_actions)
            .map(|z| {
                if success {
                    let mut row = vec![0.0; n_states];
                    for &s2 in &samples[z] {
                        row[s2 as usize] += 1.0;
                    }
                    row.iter_mut().for_each(|x| *x /= m as f64);
                    row
                } else {
                    unit(n_states, z / n_actions)
                }
            })
            .collect();
        EmpiricalKernel { n_states, n_actions, m, success, rows }
    }

    /// The fallback kernel of a failed exploration.
    pub fn fallback(n_states: usize, n_actions: usize, m: u64) -> Self {
        Self::from_samples(n_states, n_actions, m, &[])
    }
}

/// Classical value iteration `v = max_a r + gamma p v`, stopped at residual `tol (1 - gamma)`.
pub fn classical_value_iteration(
    rows: &[Row],
    rewards: &[f64],
    n_actions: usize,
    gamma: f64,
    tol: f64,
) -> Result<(ValueFn, usize, f64), LearnerError> {
    let ns = rows.len() / n_actions.max(1);
    let q = |v: &[f64], s: usize, a: usize| rewards[s * n_actions + a] + gamma * dot(&rows[s * n_actions + a], v);
    let threshold = tol * (1.0 - gamma);
    let cap = default_iteration_cap(gamma, threshold);
    let mut v = vec![0.0; ns];
    for it in 1..=cap {
        let next: Vec<f64> = (0..ns).map(|s| (0..n_actions).map(|a| q(&v, s, a)).fold(f64::NEG_INFINITY, f64::max)).collect();
        let residual = next.iter().zip(&v).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        v = next;
        if residual <= threshold {
            return Ok((ValueFn(v), it, residual));
        }
        if it == cap {
            return Err(LearnerError::IterationCap { iterations: it, residual });
        }
    }
    unreachable!("cap is at least 16")
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Output of empirical value iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct EviResult {
    pub value: ValueFn,
    /// Uniform over the maximizers, one row per state.
    pub rules: Vec<Row>,
    pub iterations: usize,
    pub residual: f64,
}

impl EviResult {
    pub fn policy(&self) -> Result<FiniteMemoryPolicy, LearnerError> {
        Ok(FiniteMemoryPolicy::stationary(self.rules.clone())?)
    }
}

/// Greedy rules that split mass evenly over actions within `slack` of the best.
pub fn tie_uniform_rules(rows: &[Row], rewards: &[f64], n_actions: usize, gamma: f64, v: &[f64], slack: f64) -> Vec<Row> {
    let ns = v.len();
    (0..ns)
        .map(|s| {
            let q: Vec<f64> = (0..n_actions).map(|a| rewards[s * n_actions + a] + gamma * dot(&rows[s * n_actions + a], v)).collect();
            let best = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let winners: Vec<bool> = q.iter().map(|&x| x >= best - slack).collect();
            let k = winners.iter().filter(|&&w| w).count() as f64;
            winners.iter().map(|&w| if w { 1.0 / k } else { 0.0 }).collect()
        })
        .collect()
}

/// Value iteration on the empirical kernel and its tie-uniform greedy rule.
pub fn evi(kernel: &EmpiricalKernel, rewards: &[f64], gamma: f64, tol: f64) -> Result<EviResult, LearnerError> {
    if rewards.len() != kernel.rows.len() {
        return Err(LearnerError::Invalid("rewards do not match the kernel".into()));
    }
    let (value, iterations, residual) = classical_value_iteration(&kernel.rows, rewards, kernel.n_actions, gamma, tol)?;
    let rules = tie_uniform_rules(&kernel.rows, rewards, kernel.n_actions, gamma, &value, 10.0 * tol);
    Ok(EviResult { value, rules, iterations, residual })
}
