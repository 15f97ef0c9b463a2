//! Robust MDP instances: states, actions, rewards, ambiguity sets and
//! controller action sets.
//!
//! Sets are stored by their vertices only. A [`DistributionSet`] is either
//! exactly its listed elements ([`SetKind::Finite`]) or their convex hull.

mod io;
mod transform;

pub use io::{parse_model, serialize_model};
pub use transform::{
    marginalize, reduce_drmdp, sa_to_s, Prior, PriorSpec, DEFAULT_PRODUCT_CAP,
};

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Row-sum tolerance for values constructed in memory.
pub const CONSTRUCTION_TOL: f64 = 1e-12;
/// Row-sum tolerance for values read from text.
pub const PARSE_TOL: f64 = 1e-9;

pub type Row = Vec<f64>;
/// `|A| x |S|` stochastic matrix, one row per action.
pub type Matrix = Vec<Row>;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("stochasticity violation at {field}: row sums to {sum}")]
    Stochasticity { field: String, sum: f64 },
    #[error("range violation at {field}: {message}")]
    Range { field: String, message: String },
    #[error("invalid model: {}", render_diagnostics(.0))]
    Invalid(Vec<Diagnostic>),
    #[error("product set at state {state} would have {count} vertices, cap is {cap}")]
    Blowup { state: String, count: u128, cap: usize },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("prior weights at {field} sum to {sum}, expected 1")]
    WeightSum { field: String, sum: f64 },
    #[error("malformed document: {0}")]
    Json(#[from] serde_json::Error),
}

fn render_diagnostics(d: &[Diagnostic]) -> String {
    d.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

/// One failed invariant, naming the field and the violated bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub field: String,
    pub message: String,
}

impl Diagnostic {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Diagnostic { field: field.into(), message: message.into() }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetKind {
    Finite,
    #[serde(rename = "hull")]
    ConvexHull,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rectangularity {
    Sa,
    S,
    General,
}

/// A finite list of distributions, or the convex hull of one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionSet<T> {
    pub kind: SetKind,
    pub vertices: Vec<T>,
}

impl<T> DistributionSet<T> {
    pub fn finite(vertices: Vec<T>) -> Self {
        DistributionSet { kind: SetKind::Finite, vertices }
    }

    pub fn hull(vertices: Vec<T>) -> Self {
        DistributionSet { kind: SetKind::ConvexHull, vertices }
    }

    pub fn singleton(x: T) -> Self {
        Self::finite(vec![x])
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Hulls and singletons are convex; finite lists of two or more are not.
    pub fn is_convex(&self) -> bool {
        self.kind == SetKind::ConvexHull || self.vertices.len() == 1
    }
}

/// The adversary's sets, in exactly one of the three rectangular layouts.
#[derive(Clone, Debug, PartialEq)]
pub enum Ambiguity {
    /// `P_{s,a}` at index `s * |A| + a`.
    Sa(Vec<DistributionSet<Row>>),
    /// `P_s` at index `s`.
    S(Vec<DistributionSet<Matrix>>),
    /// Whole kernels: `|S||A|` rows, row `s * |A| + a`.
    General(DistributionSet<Matrix>),
}

impl Ambiguity {
    pub fn rectangularity(&self) -> Rectangularity {
        match self {
            Ambiguity::Sa(_) => Rectangularity::Sa,
            Ambiguity::S(_) => Rectangularity::S,
            Ambiguity::General(_) => Rectangularity::General,
        }
    }

    /// True when every set the adversary draws from is convex.
    pub fn all_convex(&self) -> bool {
        match self {
            Ambiguity::Sa(sets) => sets.iter().all(|p| p.is_convex()),
            Ambiguity::S(sets) => sets.iter().all(|p| p.is_convex()),
            Ambiguity::General(p) => p.is_convex(),
        }
    }

    /// True when some set has more than one element.
    pub fn is_nontrivial(&self) -> bool {
        match self {
            Ambiguity::Sa(sets) => sets.iter().any(|p| p.len() > 1),
            Ambiguity::S(sets) => sets.iter().any(|p| p.len() > 1),
            Ambiguity::General(p) => p.len() > 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    #[serde(rename = "simplex")]
    FullSimplex,
    Dirac,
    Finite,
    #[serde(rename = "hull")]
    ConvexHull,
}

/// The set Q of action distributions the controller may use at each step.
#[derive(Clone, Debug, PartialEq)]
pub struct ControllerSet {
    pub kind: ControllerKind,
    /// Only meaningful for `Finite` and `ConvexHull`.
    pub vertices: Vec<Row>,
}

impl ControllerSet {
    pub fn simplex() -> Self {
        ControllerSet { kind: ControllerKind::FullSimplex, vertices: Vec::new() }
    }

    pub fn dirac() -> Self {
        ControllerSet { kind: ControllerKind::Dirac, vertices: Vec::new() }
    }

    pub fn finite(vertices: Vec<Row>) -> Self {
        ControllerSet { kind: ControllerKind::Finite, vertices }
    }

    pub fn hull(vertices: Vec<Row>) -> Self {
        ControllerSet { kind: ControllerKind::ConvexHull, vertices }
    }

    /// Vertex list with `FullSimplex` and `Dirac` expanded to point masses.
    pub fn canonical_vertices(&self, n_actions: usize) -> Vec<Row> {
        match self.kind {
            ControllerKind::FullSimplex | ControllerKind::Dirac => {
                (0..n_actions).map(|a| unit(n_actions, a)).collect()
            }
            ControllerKind::Finite | ControllerKind::ConvexHull => self.vertices.clone(),
        }
    }

    /// Whether the optimization over Q may mix vertices.
    pub fn mixes(&self) -> bool {
        matches!(self.kind, ControllerKind::FullSimplex | ControllerKind::ConvexHull)
    }

    pub fn is_convex(&self) -> bool {
        self.mixes() || self.vertices.len() == 1 && self.kind == ControllerKind::Finite
    }

    /// Whether every point mass is a member of Q.
    pub fn contains_dirac(&self, n_actions: usize) -> bool {
        match self.kind {
            ControllerKind::FullSimplex | ControllerKind::Dirac => true,
            // point masses are extreme points of the simplex, so they lie in
            // a hull only when listed as vertices
            ControllerKind::Finite | ControllerKind::ConvexHull => (0..n_actions).all(|a| {
                self.vertices
                    .iter()
                    .any(|v| v.iter().enumerate().all(|(b, &x)| x == if a == b { 1.0 } else { 0.0 }))
            }),
        }
    }
}

pub(crate) fn unit(n: usize, i: usize) -> Row {
    let mut r = vec![0.0; n];
    r[i] = 1.0;
    r
}

/// Affine map from stored rewards back to a display scale:
/// `r_display = scale * r + shift`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardMap {
    pub scale: f64,
    pub shift: f64,
}

impl RewardMap {
    /// Maps a discounted value computed on stored rewards to the display scale.
    pub fn value(&self, v: f64, gamma: f64) -> f64 {
        self.scale * v + self.shift / (1.0 - gamma)
    }

    /// Maps a value difference (a gap or margin) to the display scale.
    pub fn difference(&self, d: f64) -> f64 {
        self.scale * d
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dims {
    pub states: usize,
    pub actions: usize,
}

/// A finite robust MDP with rewards in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RobustMdp {
    pub states: Vec<String>,
    pub actions: Vec<String>,
    /// Indexed `s * |A| + a`.
    pub rewards: Vec<f64>,
    pub gamma: f64,
    pub ambiguity: Ambiguity,
    pub controller: ControllerSet,
    /// Optional display scale for values, when rewards were rescaled into `[0, 1]`.
    pub reward_map: Option<RewardMap>,
}

impl RobustMdp {
    /// Builds a model and checks every invariant at construction tolerance.
    pub fn new(
        states: Vec<String>,
        actions: Vec<String>,
        rewards: Vec<f64>,
        gamma: f64,
        ambiguity: Ambiguity,
        controller: ControllerSet,
    ) -> Result<Self, ModelError> {
        let m = RobustMdp { states, actions, rewards, gamma, ambiguity, controller, reward_map: None };
        let diags = m.validate();
        if diags.is_empty() {
            Ok(m)
        } else {
            Err(ModelError::Invalid(diags))
        }
    }

    pub fn with_reward_map(mut self, map: RewardMap) -> Self {
        self.reward_map = Some(map);
        self
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn dims(&self) -> Dims {
        Dims { states: self.states.len(), actions: self.actions.len() }
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.rewards[s * self.actions.len() + a]
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|x| x == name)
    }

    pub fn action_index(&self, name: &str) -> Option<usize> {
        self.actions.iter().position(|x| x == name)
    }

    /// Display-scale value, or the value itself when no map is attached.
    pub fn display_value(&self, v: f64) -> f64 {
        match self.reward_map {
            Some(m) => m.value(v, self.gamma),
            None => v,
        }
    }

    pub fn display_difference(&self, d: f64) -> f64 {
        match self.reward_map {
            Some(m) => m.difference(d),
            None => d,
        }
    }

    /// Lists every violated invariant. Empty iff the model is valid.
    pub fn validate(&self) -> Vec<Diagnostic> {
        self.validate_with(CONSTRUCTION_TOL)
    }

    pub(crate) fn validate_with(&self, tol: f64) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let ns = self.states.len();
        let na = self.actions.len();
        if ns == 0 {
            out.push(Diagnostic::new("states", "at least one state required"));
        }
        if na == 0 {
            out.push(Diagnostic::new("actions", "at least one action required"));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            out.push(Diagnostic::new(
                "gamma",
                format!("discount out of range (0, 1): {}", self.gamma),
            ));
        }
        if self.rewards.len() != ns * na {
            out.push(Diagnostic::new(
                "rewards",
                format!("expected {} entries, found {}", ns * na, self.rewards.len()),
            ));
        } else {
            for (i, &r) in self.rewards.iter().enumerate() {
                let field = format!("rewards[{}|{}]", self.states[i / na], self.actions[i % na]);
                if !r.is_finite() {
                    out.push(Diagnostic::new(field, "reward not finite"));
                } else if r < 0.0 {
                    out.push(Diagnostic::new(field, format!("reward below 0: {r}")));
                } else if r > 1.0 {
                    out.push(Diagnostic::new(field, format!("reward above 1: {r}")));
                }
            }
        }
        self.validate_controller(tol, &mut out);
        if ns > 0 && na > 0 {
            self.validate_ambiguity(tol, &mut out);
        }
        out
    }

    fn validate_controller(&self, tol: f64, out: &mut Vec<Diagnostic>) {
        let na = self.actions.len();
        match self.controller.kind {
            ControllerKind::FullSimplex | ControllerKind::Dirac => {}
            ControllerKind::Finite | ControllerKind::ConvexHull => {
                if self.controller.vertices.is_empty() {
                    out.push(Diagnostic::new("controller_set", "vertex list is empty"));
                }
                for (i, v) in self.controller.vertices.iter().enumerate() {
                    check_row(v, na, tol, &format!("controller_set.vertices[{i}]"), out);
                }
            }
        }
    }

    fn validate_ambiguity(&self, tol: f64, out: &mut Vec<Diagnostic>) {
        let ns = self.states.len();
        let na = self.actions.len();
        match &self.ambiguity {
            Ambiguity::Sa(sets) => {
                if sets.len() != ns * na {
                    out.push(Diagnostic::new(
                        "ambiguity.sets",
                        format!("expected {} state-action sets, found {}", ns * na, sets.len()),
                    ));
                    return;
                }
                for (i, set) in sets.iter().enumerate() {
                    let key = format!("ambiguity.sets[{}|{}]", self.states[i / na], self.actions[i % na]);
                    if set.is_empty() {
                        out.push(Diagnostic::new(key.clone(), "set is empty"));
                    }
                    for (k, row) in set.vertices.iter().enumerate() {
                        check_row(row, ns, tol, &format!("{key}[{k}]"), out);
                    }
                }
            }
            Ambiguity::S(sets) => {
                if sets.len() != ns {
                    out.push(Diagnostic::new(
                        "ambiguity.sets",
                        format!("expected {} state sets, found {}", ns, sets.len()),
                    ));
                    return;
                }
                for (s, set) in sets.iter().enumerate() {
                    let key = format!("ambiguity.sets[{}]", self.states[s]);
                    if set.is_empty() {
                        out.push(Diagnostic::new(key.clone(), "set is empty"));
                    }
                    for (k, m) in set.vertices.iter().enumerate() {
                        check_matrix(m, na, ns, tol, &format!("{key}[{k}]"), out);
                    }
                }
            }
            Ambiguity::General(set) => {
                if set.is_empty() {
                    out.push(Diagnostic::new("ambiguity.sets", "set is empty"));
                }
                for (k, m) in set.vertices.iter().enumerate() {
                    check_matrix(m, ns * na, ns, tol, &format!("ambiguity.sets[{k}]"), out);
                }
            }
        }
    }

    /// Every stationary kernel built from one vertex per set (product order,
    /// earliest set most significant). Refuses when the count exceeds `cap`.
    pub fn vertex_kernels(&self, cap: usize) -> Result<Vec<Kernel>, ModelError> {
        let ns = self.n_states();
        let na = self.n_actions();
        let sizes: Vec<usize> = match &self.ambiguity {
            Ambiguity::Sa(sets) => sets.iter().map(|p| p.len()).collect(),
            Ambiguity::S(sets) => sets.iter().map(|p| p.len()).collect(),
            Ambiguity::General(p) => vec![p.len()],
        };
        let count = sizes.iter().fold(1u128, |acc, &k| acc.saturating_mul(k as u128));
        if count > cap as u128 {
            return Err(ModelError::Blowup { state: "all".into(), count, cap });
        }
        let mut out = Vec::with_capacity(count as usize);
        for choice in MixedRadix::new(sizes) {
            let mut rows = Vec::with_capacity(ns * na * ns);
            match &self.ambiguity {
                Ambiguity::Sa(sets) => {
                    for (i, &c) in choice.iter().enumerate() {
                        rows.extend_from_slice(&sets[i].vertices[c]);
                    }
                }
                Ambiguity::S(sets) => {
                    for (s, &c) in choice.iter().enumerate() {
                        for row in &sets[s].vertices[c] {
                            rows.extend_from_slice(row);
                        }
                    }
                }
                Ambiguity::General(p) => {
                    for row in &p.vertices[choice[0]] {
                        rows.extend_from_slice(row);
                    }
                }
            }
            out.push(Kernel { n_states: ns, n_actions: na, data: rows });
        }
        Ok(out)
    }
}

fn check_row(row: &[f64], width: usize, tol: f64, field: &str, out: &mut Vec<Diagnostic>) {
    if row.len() != width {
        out.push(Diagnostic::new(field, format!("expected {width} entries, found {}", row.len())));
        return;
    }
    if row.iter().any(|x| !x.is_finite()) {
        out.push(Diagnostic::new(field, "entry not finite"));
        return;
    }
    if let Some(x) = row.iter().find(|&&x| x < 0.0) {
        out.push(Diagnostic::new(field, format!("entry below 0: {x}")));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > tol {
        out.push(Diagnostic::new(field, format!("row sum {sum} differs from 1 by more than {tol:e}")));
    }
}

fn check_matrix(m: &Matrix, rows: usize, width: usize, tol: f64, field: &str, out: &mut Vec<Diagnostic>) {
    if m.len() != rows {
        out.push(Diagnostic::new(field, format!("expected {rows} rows, found {}", m.len())));
        return;
    }
    for (i, row) in m.iter().enumerate() {
        check_row(row, width, tol, &format!("{field}[{i}]"), out);
    }
}

/// A stationary transition kernel, rows indexed `s * |A| + a`.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    n_states: usize,
    n_actions: usize,
    data: Vec<f64>,
}

impl Kernel {
    /// `rows[s * |A| + a]` is the next-state distribution.
    pub fn from_rows(n_states: usize, n_actions: usize, rows: &[Row]) -> Result<Self, ModelError> {
        if rows.len() != n_states * n_actions {
            return Err(ModelError::Schema(format!(
                "kernel needs {} rows, found {}",
                n_states * n_actions,
                rows.len()
            )));
        }
        let mut diags = Vec::new();
        for (i, r) in rows.iter().enumerate() {
            check_row(r, n_states, CONSTRUCTION_TOL, &format!("kernel[{i}]"), &mut diags);
        }
        if !diags.is_empty() {
            return Err(ModelError::Invalid(diags));
        }
        Ok(Kernel { n_states, n_actions, data: rows.concat() })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.n_actions + a) * self.n_states;
        &self.data[start..start + self.n_states]
    }

    /// The `|A| x |S|` matrix the kernel uses at state `s`.
    pub fn matrix(&self, s: usize) -> Matrix {
        (0..self.n_actions).map(|a| self.row(s, a).to_vec()).collect()
    }

    pub fn rows(&self) -> Vec<Row> {
        self.data.chunks(self.n_states).map(|c| c.to_vec()).collect()
    }
}

/// Iterates all tuples `c` with `c[i] < sizes[i]`, last position fastest.
#[derive(Clone, Debug)]
pub struct MixedRadix {
    sizes: Vec<usize>,
    next: Option<Vec<usize>>,
}

impl MixedRadix {
    pub fn new(sizes: Vec<usize>) -> Self {
        let next = if sizes.iter().any(|&k| k == 0) { None } else { Some(vec![0; sizes.len()]) };
        MixedRadix { sizes, next }
    }
}

impl Iterator for MixedRadix {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let cur = self.next.take()?;
        let mut succ = cur.clone();
        let mut i = succ.len();
        loop {
            if i == 0 {
                break;
            }
            i -= 1;
            succ[i] += 1;
            if succ[i] < self.sizes[i] {
                self.next = Some(succ);
                break;
            }
            succ[i] = 0;
        }
        Some(cur)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn two_state() -> RobustMdp {
        RobustMdp::new(
            vec!["x".into(), "y".into()],
            vec!["a".into(), "b".into()],
            vec![0.0, 1.0, 0.5, 0.5],
            0.9,
            Ambiguity::S(vec![
                DistributionSet::finite(vec![
                    vec![vec![1.0, 0.0], vec![0.0, 1.0]],
                    vec![vec![0.0, 1.0], vec![1.0, 0.0]],
                ]),
                DistributionSet::singleton(vec![vec![0.5, 0.5], vec![0.5, 0.5]]),
            ]),
            ControllerSet::simplex(),
        )
        .unwrap()
    }

    #[test]
    fn valid_model_has_no_diagnostics() {
        assert!(two_state().validate().is_empty());
    }

    #[test]
    fn gamma_one_is_reported() {
        let mut m = two_state();
        m.gamma = 1.0;
        let d = m.validate();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].field, "gamma");
        assert!(d[0].message.contains("discount out of range"));
    }

    #[test]
    fn negative_reward_is_reported() {
        let mut m = two_state();
        m.rewards[1] = -0.1;
        let d = m.validate();
        assert_eq!(d.len(), 1);
        assert!(d[0].message.contains("reward below 0"));
        assert!(d[0].field.contains("x|b"));
    }

    #[test]
    fn bad_row_sum_is_reported() {
        let mut m = two_state();
        if let Ambiguity::S(sets) = &mut m.ambiguity {
            sets[1].vertices[0][0] = vec![0.5, 0.4];
        }
        let d = m.validate();
        assert_eq!(d.len(), 1);
        assert!(d[0].message.contains("row sum"));
    }

    #[test]
    fn controller_dirac_membership() {
        assert!(ControllerSet::simplex().contains_dirac(3));
        assert!(ControllerSet::hull(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).contains_dirac(2));
        assert!(!ControllerSet::hull(vec![vec![0.5, 0.5], vec![0.0, 1.0]]).contains_dirac(2));
        assert!(!ControllerSet::dirac().is_convex());
        assert!(ControllerSet::simplex().is_convex());
    }

    #[test]
    fn vertex_kernels_enumerate_products() {
        let ks = two_state().vertex_kernels(10).unwrap();
        assert_eq!(ks.len(), 2);
        assert_eq!(ks[1].row(0, 0), &[0.0, 1.0]);
        assert_eq!(ks[1].row(1, 1), &[0.5, 0.5]);
        assert!(two_state().vertex_kernels(1).is_err());
    }

    #[test]
    fn mixed_radix_order() {
        let all: Vec<_> = MixedRadix::new(vec![2, 3]).collect();
        assert_eq!(all.len(), 6);
        assert_eq!(all[0], vec![0, 0]);
        assert_eq!(all[1], vec![0, 1]);
        assert_eq!(all[5], vec![1, 2]);
        assert_eq!(MixedRadix::new(vec![]).count(), 1);
        assert_eq!(MixedRadix::new(vec![2, 0]).count(), 0);
    }

    #[test]
    fn reward_map_inverts_normalization() {
        let map = RewardMap { scale: 2.0, shift: -1.0 };
        // constant reward 1 on the original scale is 1 after normalization
        let gamma = 0.9;
        let normalized = 1.0 / (1.0 - gamma);
        assert!((map.value(normalized, gamma) - 10.0).abs() < 1e-12);
    }
}
