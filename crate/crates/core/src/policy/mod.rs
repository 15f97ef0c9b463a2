//! Controller and adversary policies as finite-memory automata, with
//! simulation and exact, Monte Carlo and robust evaluation.

pub(crate) mod chain;
mod evaluate;
mod io;
mod membership;
mod robust;

pub use evaluate::{
    evaluate_exact, evaluate_exact_with, evaluate_mc, rollout, simulate, truncation_horizon, EvalMethod, EvalOptions,
    EvalResult, Trajectory, DEFAULT_LINEAR_CAP,
};
pub use io::{parse_policy, serialize_policy};
pub use membership::{matrix_in_set, row_in_controller_set, row_in_hull};
pub use robust::{robust_evaluate, robust_evaluate_with, AdversaryClass, RobustOptions, RobustValue, WorstCase};

use crate::bellman::{argmax, cell_supinf, BellmanError, QFn};
use crate::model::{Kernel, Matrix, ModelError, RobustMdp, Row, CONSTRUCTION_TOL};
use std::borrow::Cow;
use std::fmt::Debug;
use std::hash::Hash;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("invalid policy: {0}")]
    Invalid(String),
    #[error("adversary decision at memory {memory}, state {state} is outside the ambiguity set")]
    Membership { memory: usize, state: usize },
    #[error("controller decision at memory {memory}, state {state} is outside the controller set")]
    ControllerSet { memory: usize, state: usize },
    #[error("general (non-rectangular) ambiguity is not supported here")]
    General,
    #[error("{what} has {count} elements, above the cap of {cap}")]
    TooLarge { what: String, count: u128, cap: usize },
    #[error(transparent)]
    Bellman(#[from] BellmanError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("malformed policy document: {0}")]
    Json(#[from] serde_json::Error),
}

/// A controller whose decisions depend on the history only through a memory.
pub trait Controller {
    type Memory: Clone + Eq + Hash + Debug;

    fn initial_memory(&self) -> Self::Memory;
    /// Action distribution at `state`.
    fn decide(&self, memory: &Self::Memory, state: usize) -> Cow<'_, [f64]>;
    fn update(&self, memory: &Self::Memory, state: usize, action: usize, next: usize) -> Self::Memory;
}

/// An adversary choosing next-state distributions from a memory.
pub trait Adversary {
    type Memory: Clone + Eq + Hash + Debug;

    fn initial_memory(&self) -> Self::Memory;
    /// Next-state distribution after `action` at `state`.
    fn row(&self, memory: &Self::Memory, state: usize, action: usize) -> &[f64];
    fn update(&self, memory: &Self::Memory, state: usize, action: usize, next: usize) -> Self::Memory;
}

/// A stationary kernel is a memoryless adversary.
impl Adversary for Kernel {
    type Memory = ();

    fn initial_memory(&self) {}

    fn row(&self, _: &(), state: usize, action: usize) -> &[f64] {
        Kernel::row(self, state, action)
    }

    fn update(&self, _: &(), _: usize, _: usize, _: usize) {}
}

/// Controller automaton given by explicit tables.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteMemoryPolicy {
    n_memory: usize,
    n_states: usize,
    n_actions: usize,
    initial: usize,
    /// Indexed `m * |S| + s`.
    decide: Vec<Row>,
    /// Indexed `((m * |S| + s) * |A| + a) * |S| + s'`.
    update: Vec<usize>,
}

impl FiniteMemoryPolicy {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        n_memory: usize,
        initial: usize,
        decide: Vec<Row>,
        update: Vec<usize>,
    ) -> Result<Self, PolicyError> {
        if n_memory == 0 || initial >= n_memory {
            return Err(PolicyError::Invalid("initial memory out of range".into()));
        }
        if decide.len() != n_memory * n_states {
            return Err(PolicyError::Invalid(format!(
                "expected {} decision rows, found {}",
                n_memory * n_states,
                decide.len()
            )));
        }
        for (i, row) in decide.iter().enumerate() {
            check_distribution(row, n_actions)
                .map_err(|e| PolicyError::Invalid(format!("decision at memory {}, state {}: {e}", i / n_states, i % n_states)))?;
        }
        if update.len() != n_memory * n_states * n_actions * n_states {
            return Err(PolicyError::Invalid("update table has the wrong size".into()));
        }
        if update.iter().any(|&m| m >= n_memory) {
            return Err(PolicyError::Invalid("update table leaves the memory range".into()));
        }
        Ok(FiniteMemoryPolicy { n_memory, n_states, n_actions, initial, decide, update })
    }

    /// One decision rule applied at every step.
    pub fn stationary(rows: Vec<Row>) -> Result<Self, PolicyError> {
        let n_states = rows.len();
        let n_actions = rows.first().map_or(0, |r| r.len());
        FiniteMemoryPolicy::new(n_states, n_actions, 1, 0, rows, vec![0; n_states * n_actions * n_states])
    }

    /// Plays `actions[s]` at state `s`.
    pub fn deterministic(actions: &[usize], n_actions: usize) -> Result<Self, PolicyError> {
        if actions.iter().any(|&a| a >= n_actions) {
            return Err(PolicyError::Invalid("action index out of range".into()));
        }
        Self::stationary(actions.iter().map(|&a| crate::model::unit(n_actions, a)).collect())
    }

    /// Time-indexed rules: `prefix` once, then `cycle` repeated forever.
    /// Each rule lists one action distribution per state.
    pub fn markov_schedule(prefix: Vec<Vec<Row>>, cycle: Vec<Vec<Row>>) -> Result<Self, PolicyError> {
        if cycle.is_empty() {
            return Err(PolicyError::Invalid("a schedule needs at least one repeating rule".into()));
        }
        let n_states = cycle[0].len();
        let n_actions = cycle[0].first().map_or(0, |r| r.len());
        let p = prefix.len();
        let total = p + cycle.len();
        let rules: Vec<Vec<Row>> = prefix.into_iter().chain(cycle).collect();
        if rules.iter().any(|r| r.len() != n_states) {
            return Err(PolicyError::Invalid("every rule needs one row per state".into()));
        }
        let decide: Vec<Row> = rules.into_iter().flatten().collect();
        let mut update = Vec::with_capacity(total * n_states * n_actions * n_states);
        for m in 0..total {
            let next = if m + 1 < total { m + 1 } else { p };
            update.extend(std::iter::repeat_n(next, n_states * n_actions * n_states));
        }
        FiniteMemoryPolicy::new(n_states, n_actions, total, 0, decide, update)
    }

    pub fn n_memory(&self) -> usize {
        self.n_memory
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn rule(&self, memory: usize, state: usize) -> &[f64] {
        &self.decide[memory * self.n_states + state]
    }

    pub fn next_memory(&self, memory: usize, state: usize, action: usize, next: usize) -> usize {
        self.update[((memory * self.n_states + state) * self.n_actions + action) * self.n_states + next]
    }

    pub fn is_stationary(&self) -> bool {
        self.n_memory == 1
    }

    /// Memory moves with time only, whatever is observed.
    pub fn is_markov(&self) -> bool {
        let block = self.n_states * self.n_actions * self.n_states;
        self.update.chunks(block).all(|c| c.iter().all(|&m| m == c[0]))
    }

    /// Checks every decision rule against the model's controller set.
    pub fn check_controller_set(&self, model: &RobustMdp) -> Result<(), PolicyError> {
        self.check_dims(model)?;
        match self.decide.iter().position(|row| !row_in_controller_set(&model.controller, row)) {
            Some(i) => Err(PolicyError::ControllerSet { memory: i / self.n_states, state: i % self.n_states }),
            None => Ok(()),
        }
    }

    /// Checks that the policy fits the model's state and action counts.
    pub fn check_dims(&self, model: &RobustMdp) -> Result<(), PolicyError> {
        if self.n_states != model.n_states() || self.n_actions != model.n_actions() {
            return Err(PolicyError::Invalid(format!(
                "policy is for {} states and {} actions, model has {} and {}",
                self.n_states,
                self.n_actions,
                model.n_states(),
                model.n_actions()
            )));
        }
        Ok(())
    }
}

impl Controller for FiniteMemoryPolicy {
    type Memory = usize;

    fn initial_memory(&self) -> usize {
        self.initial
    }

    fn decide(&self, memory: &usize, state: usize) -> Cow<'_, [f64]> {
        Cow::Borrowed(self.rule(*memory, state))
    }

    fn update(&self, memory: &usize, state: usize, action: usize, next: usize) -> usize {
        self.next_memory(*memory, state, action, next)
    }
}

fn check_distribution(row: &[f64], width: usize) -> Result<(), String> {
    if row.len() != width {
        return Err(format!("expected {width} entries, found {}", row.len()));
    }
    if row.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err("entries must be finite and nonnegative".into());
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > CONSTRUCTION_TOL {
        return Err(format!("row sums to {sum}"));
    }
    Ok(())
}

/// Adversary automaton whose decisions are checked against the model's sets.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteMemoryAdversary {
    n_memory: usize,
    n_states: usize,
    n_actions: usize,
    initial: usize,
    /// `|A| x |S|` matrix per `m * |S| + s`.
    decide: Vec<Matrix>,
    /// Indexed like [`FiniteMemoryPolicy`]'s update table.
    update: Vec<usize>,
}

impl FiniteMemoryAdversary {
    pub fn new(
        model: &RobustMdp,
        n_memory: usize,
        initial: usize,
        decide: Vec<Matrix>,
        update: Vec<usize>,
    ) -> Result<Self, PolicyError> {
        let ns = model.n_states();
        let na = model.n_actions();
        if n_memory == 0 || initial >= n_memory {
            return Err(PolicyError::Invalid("initial memory out of range".into()));
        }
        if decide.len() != n_memory * ns || update.len() != n_memory * ns * na * ns {
            return Err(PolicyError::Invalid("adversary tables have the wrong size".into()));
        }
        if update.iter().any(|&m| m >= n_memory) {
            return Err(PolicyError::Invalid("update table leaves the memory range".into()));
        }
        for (i, m) in decide.iter().enumerate() {
            if !matrix_in_set(model, i % ns, m)? {
                return Err(PolicyError::Membership { memory: i / ns, state: i % ns });
            }
        }
        Ok(FiniteMemoryAdversary { n_memory, n_states: ns, n_actions: na, initial, decide, update })
    }

    /// The same matrix at every visit of each state.
    pub fn stationary(model: &RobustMdp, matrices: Vec<Matrix>) -> Result<Self, PolicyError> {
        let ns = model.n_states();
        let na = model.n_actions();
        Self::new(model, 1, 0, matrices, vec![0; ns * na * ns])
    }

    /// Time-indexed kernels: `prefix` once, then `cycle` repeated forever.
    /// Each kernel lists one matrix per state.
    pub fn markov(model: &RobustMdp, prefix: Vec<Vec<Matrix>>, cycle: Vec<Vec<Matrix>>) -> Result<Self, PolicyError> {
        if cycle.is_empty() {
            return Err(PolicyError::Invalid("a schedule needs at least one repeating kernel".into()));
        }
        let ns = model.n_states();
        let na = model.n_actions();
        let p = prefix.len();
        let total = p + cycle.len();
        let decide: Vec<Matrix> = prefix.into_iter().chain(cycle).flatten().collect();
        let mut update = Vec::with_capacity(total * ns * na * ns);
        for m in 0..total {
            let next = if m + 1 < total { m + 1 } else { p };
            update.extend(std::iter::repeat_n(next, ns * na * ns));
        }
        Self::new(model, total, 0, decide, update)
    }

    pub fn n_memory(&self) -> usize {
        self.n_memory
    }

    pub fn matrix(&self, memory: usize, state: usize) -> &Matrix {
        &self.decide[memory * self.n_states + state]
    }
}

impl Adversary for FiniteMemoryAdversary {
    type Memory = usize;

    fn initial_memory(&self) -> usize {
        self.initial
    }

    fn row(&self, memory: &usize, state: usize, action: usize) -> &[f64] {
        &self.decide[*memory * self.n_states + state][action]
    }

    fn update(&self, memory: &usize, state: usize, action: usize, next: usize) -> usize {
        self.update[((*memory * self.n_states + state) * self.n_actions + action) * self.n_states + next]
    }
}

/// Stationary rule taking the sup-inf maximizer at every state.
pub fn greedy_from_value(model: &RobustMdp, u: &[f64]) -> Result<FiniteMemoryPolicy, PolicyError> {
    let rows = (0..model.n_states())
        .map(|s| cell_supinf(model, s, u).map(|c| c.controller))
        .collect::<Result<Vec<_>, _>>()?;
    // clean LP round-off so the row passes the stochasticity check
    let rows = rows
        .into_iter()
        .map(|r| {
            let r: Row = r.into_iter().map(|x| x.max(0.0)).collect();
            let sum: f64 = r.iter().sum();
            r.into_iter().map(|x| x / sum).collect()
        })
        .collect();
    FiniteMemoryPolicy::stationary(rows)
}

/// Deterministic rule `argmax_a q(s, a)`, lowest index on ties.
pub fn greedy_from_q(q: &QFn) -> Result<FiniteMemoryPolicy, PolicyError> {
    let ns = q.values.len() / q.n_actions;
    let actions: Vec<usize> = (0..ns).map(|s| argmax(q.row(s).iter().copied()).expect("non-empty").0).collect();
    FiniteMemoryPolicy::deterministic(&actions, q.n_actions)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_memory_cycles() {
        let r = |a: f64| vec![vec![a, 1.0 - a]];
        let p = FiniteMemoryPolicy::markov_schedule(vec![r(1.0), r(0.0)], vec![r(0.75), r(0.5)]).unwrap();
        let mut m = p.initial_memory();
        let mut seen = Vec::new();
        for _ in 0..7 {
            seen.push(p.decide(&m, 0)[0]);
            m = p.update(&m, 0, 0, 0);
        }
        assert_eq!(seen, vec![1.0, 0.0, 0.75, 0.5, 0.75, 0.5, 0.75]);
    }

    #[test]
    fn rejects_non_stochastic_rules() {
        assert!(FiniteMemoryPolicy::stationary(vec![vec![0.5, 0.6]]).is_err());
        assert!(FiniteMemoryPolicy::deterministic(&[2], 2).is_err());
    }

    #[test]
    fn greedy_q_ties_go_to_first_action() {
        let q = QFn { n_actions: 2, values: vec![1.0, 1.0, 0.0, 2.0] };
        let p = greedy_from_q(&q).unwrap();
        assert_eq!(p.rule(0, 0), &[1.0, 0.0]);
        assert_eq!(p.rule(0, 1), &[0.0, 1.0]);
    }
}
