//! Fixed-point iteration for the robust Bellman operators.

use super::cells::{cell_infsup, cell_supinf, dot};
use super::BellmanError;
use crate::model::{Ambiguity, RobustMdp, Row};
use serde::{Deserialize, Serialize};
use std::ops::Deref;

/// A value per state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ValueFn(pub Vec<f64>);

impl ValueFn {
    pub fn zeros(n: usize) -> Self {
        ValueFn(vec![0.0; n])
    }

    pub fn sup_distance(&self, other: &[f64]) -> f64 {
        sup_distance(&self.0, other)
    }

    pub fn sup_norm(&self) -> f64 {
        self.0.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// `sum_s mu(s) u(s)`.
    pub fn expect(&self, mu: &[f64]) -> f64 {
        dot(mu, &self.0)
    }
}

impl Deref for ValueFn {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// A value per state-action pair, indexed `s * |A| + a`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QFn {
    pub n_actions: usize,
    pub values: Vec<f64>,
}

impl QFn {
    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.n_actions + a]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.n_actions..(s + 1) * self.n_actions]
    }

    /// `max_a q(s, a)` for every state.
    pub fn greedy_values(&self) -> ValueFn {
        ValueFn(
            self.values
                .chunks(self.n_actions)
                .map(|r| r.iter().copied().fold(f64::NEG_INFINITY, f64::max))
                .collect(),
        )
    }
}

pub(crate) fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport<T> {
    pub fixed_point: T,
    pub iterations: usize,
    /// Sup-norm of the last update.
    pub residual: f64,
    pub tolerance: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    /// Target distance to the fixed point.
    pub tol: f64,
    /// Defaults to [`default_iteration_cap`].
    pub max_iterations: Option<usize>,
}

impl SolverOptions {
    pub fn new(tol: f64) -> Self {
        SolverOptions { tol, max_iterations: None }
    }
}

/// `ceil(log(tol (1 - gamma)) / log gamma) + 16`.
pub fn default_iteration_cap(gamma: f64, tol: f64) -> usize {
    let n = ((tol * (1.0 - gamma)).ln() / gamma.ln()).ceil();
    (n.max(0.0) as usize).saturating_add(16)
}

/// Update size below which the contraction bound places the iterate within `tol`.
pub(crate) fn stopping_threshold(gamma: f64, tol: f64) -> f64 {
    tol * (1.0 - gamma) / gamma
}

pub fn apply_supinf(model: &RobustMdp, u: &[f64]) -> Result<ValueFn, BellmanError> {
    (0..model.n_states()).map(|s| cell_supinf(model, s, u).map(|c| c.value)).collect::<Result<_, _>>().map(ValueFn)
}

pub fn apply_infsup(model: &RobustMdp, u: &[f64]) -> Result<ValueFn, BellmanError> {
    (0..model.n_states()).map(|s| cell_infsup(model, s, u).map(|c| c.value)).collect::<Result<_, _>>().map(ValueFn)
}

pub fn solve_supinf(model: &RobustMdp, tol: f64) -> Result<SolveReport<ValueFn>, BellmanError> {
    solve_supinf_with(model, SolverOptions::new(tol))
}

pub fn solve_infsup(model: &RobustMdp, tol: f64) -> Result<SolveReport<ValueFn>, BellmanError> {
    solve_infsup_with(model, SolverOptions::new(tol))
}

pub fn solve_supinf_with(model: &RobustMdp, opts: SolverOptions) -> Result<SolveReport<ValueFn>, BellmanError> {
    iterate(model, opts, apply_supinf)
}

pub fn solve_infsup_with(model: &RobustMdp, opts: SolverOptions) -> Result<SolveReport<ValueFn>, BellmanError> {
    iterate(model, opts, apply_infsup)
}

fn check_tol(tol: f64) -> Result<(), BellmanError> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(BellmanError::Degenerate(format!("tolerance must be positive, got {tol}")))
    }
}

fn iterate(
    model: &RobustMdp,
    opts: SolverOptions,
    op: fn(&RobustMdp, &[f64]) -> Result<ValueFn, BellmanError>,
) -> Result<SolveReport<ValueFn>, BellmanError> {
    check_tol(opts.tol)?;
    if matches!(model.ambiguity, Ambiguity::General(_)) {
        return Err(BellmanError::General);
    }
    let cap = opts.max_iterations.unwrap_or_else(|| default_iteration_cap(model.gamma, opts.tol));
    let threshold = stopping_threshold(model.gamma, opts.tol);
    let mut u = ValueFn::zeros(model.n_states());
    let mut residual = f64::INFINITY;
    for it in 1..=cap {
        let next = op(model, &u)?;
        residual = next.sup_distance(&u);
        u = next;
        if residual <= threshold {
            return Ok(SolveReport { fixed_point: u, iterations: it, residual, tolerance: opts.tol });
        }
    }
    Err(BellmanError::IterationCap { iterations: cap, residual })
}

/// Next-state rows the adversary may use after playing `a` at `s`.
pub(crate) fn marginal_rows(model: &RobustMdp, s: usize, a: usize) -> Vec<&Row> {
    match &model.ambiguity {
        Ambiguity::Sa(sets) => sets[s * model.n_actions() + a].vertices.iter().collect(),
        Ambiguity::S(sets) => sets[s].vertices.iter().map(|m| &m[a]).collect(),
        Ambiguity::General(_) => Vec::new(),
    }
}

/// `q(s,a) = r(s,a) + gamma * min over the marginal set of E[max_b q(X1, b)]`.
pub fn solve_q(model: &RobustMdp, tol: f64) -> Result<SolveReport<QFn>, BellmanError> {
    solve_q_with(model, SolverOptions::new(tol))
}

pub fn solve_q_with(model: &RobustMdp, opts: SolverOptions) -> Result<SolveReport<QFn>, BellmanError> {
    check_tol(opts.tol)?;
    if matches!(model.ambiguity, Ambiguity::General(_)) {
        return Err(BellmanError::General);
    }
    let ns = model.n_states();
    let na = model.n_actions();
    let cap = opts.max_iterations.unwrap_or_else(|| default_iteration_cap(model.gamma, opts.tol));
    let threshold = stopping_threshold(model.gamma, opts.tol);
    let mut q = QFn { n_actions: na, values: vec![0.0; ns * na] };
    let mut residual = f64::INFINITY;
    for it in 1..=cap {
        let w = q.greedy_values();
        let mut next = Vec::with_capacity(ns * na);
        for s in 0..ns {
            for a in 0..na {
                let rows = marginal_rows(model, s, a);
                if rows.is_empty() {
                    return Err(BellmanError::EmptySet(format!("state-action ({s}, {a})")));
                }
                let worst = rows.iter().map(|r| dot(r, &w)).fold(f64::INFINITY, f64::min);
                next.push(model.reward(s, a) + model.gamma * worst);
            }
        }
        residual = sup_distance(&next, &q.values);
        q.values = next;
        if residual <= threshold {
            return Ok(SolveReport { fixed_point: q, iterations: it, residual, tolerance: opts.tol });
        }
    }
    Err(BellmanError::IterationCap { iterations: cap, residual })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Structural {
    /// Convex controller set and convex adversary sets (minimax theorem).
    GuaranteedConvex,
    /// SA-rectangular adversary and a controller set containing every point mass.
    GuaranteedSaDirac,
    NumericOnly,
}

impl Structural {
    pub fn is_guaranteed(self) -> bool {
        self != Structural::NumericOnly
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum NumericVerdict {
    Interchanges,
    DoesNotInterchange,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterchangeReport {
    /// `||u_supinf - u_infsup||_inf`.
    pub gap: f64,
    pub structural: Structural,
    pub numeric: NumericVerdict,
    pub supinf: SolveReport<ValueFn>,
    pub infsup: SolveReport<ValueFn>,
}

/// Structural reason, if any, for the two Bellman equations to agree.
pub fn structural_guarantee(model: &RobustMdp) -> Structural {
    if model.controller.is_convex() && model.ambiguity.all_convex() {
        Structural::GuaranteedConvex
    } else if matches!(model.ambiguity, Ambiguity::Sa(_)) && model.controller.contains_dirac(model.n_actions()) {
        Structural::GuaranteedSaDirac
    } else {
        Structural::NumericOnly
    }
}

pub fn check_interchange(model: &RobustMdp, tol: f64) -> Result<InterchangeReport, BellmanError> {
    let supinf = solve_supinf(model, tol)?;
    let infsup = solve_infsup(model, tol)?;
    let gap = supinf.fixed_point.sup_distance(&infsup.fixed_point);
    let numeric = if gap <= 3.0 * tol { NumericVerdict::Interchanges } else { NumericVerdict::DoesNotInterchange };
    Ok(InterchangeReport { gap, structural: structural_guarantee(model), numeric, supinf, infsup })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ControllerSet, DistributionSet};
    use approx::assert_abs_diff_eq;

    fn chain(gamma: f64) -> RobustMdp {
        RobustMdp::new(
            vec!["x".into(), "y".into()],
            vec!["stay".into(), "move".into()],
            vec![0.0, 0.0, 1.0, 0.5],
            gamma,
            Ambiguity::S(vec![
                DistributionSet::singleton(vec![vec![1.0, 0.0], vec![0.0, 1.0]]),
                DistributionSet::singleton(vec![vec![0.0, 1.0], vec![1.0, 0.0]]),
            ]),
            ControllerSet::dirac(),
        )
        .unwrap()
    }

    #[test]
    fn classical_chain_fixed_point() {
        // move from x once, then stay at y forever
        let g = 0.9;
        let rep = solve_supinf(&chain(g), 1e-10).unwrap();
        assert_abs_diff_eq!(rep.fixed_point[1], 1.0 / (1.0 - g), epsilon = 1e-9);
        assert_abs_diff_eq!(rep.fixed_point[0], g / (1.0 - g), epsilon = 1e-9);
        assert!(rep.residual <= 1e-10 * (1.0 - g) / g);
    }

    #[test]
    fn zero_rewards_stay_zero() {
        let mut m = chain(0.5);
        m.rewards = vec![0.0; 4];
        assert_eq!(apply_supinf(&m, &[0.0, 0.0]).unwrap().0, vec![0.0, 0.0]);
    }

    #[test]
    fn q_matches_value_on_singletons() {
        let m = chain(0.7);
        let q = solve_q(&m, 1e-10).unwrap().fixed_point;
        let u = solve_supinf(&m, 1e-10).unwrap().fixed_point;
        assert!(q.greedy_values().sup_distance(&u) <= 2e-10);
    }

    #[test]
    fn iteration_cap_is_reported() {
        let opts = SolverOptions { tol: 1e-9, max_iterations: Some(3) };
        assert!(matches!(solve_supinf_with(&chain(0.9), opts), Err(BellmanError::IterationCap { iterations: 3, .. })));
    }

    #[test]
    fn default_cap_formula() {
        let cap = default_iteration_cap(0.9, 1e-9);
        let expected = ((1e-9f64 * 0.1).ln() / 0.9f64.ln()).ceil() as usize + 16;
        assert_eq!(cap, expected);
    }

    #[test]
    fn general_is_refused() {
        let mut m = chain(0.9);
        m.ambiguity = Ambiguity::General(DistributionSet::singleton(vec![vec![1.0, 0.0]; 4]));
        assert!(matches!(solve_supinf(&m, 1e-9), Err(BellmanError::General)));
    }
}
