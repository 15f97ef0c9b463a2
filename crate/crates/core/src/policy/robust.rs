//! Worst-case value of a controller over the ambiguity set.

use super::chain::solve_linear;
use super::evaluate::{evaluate_exact_with, EvalMethod, EvalOptions};
use super::{Controller, FiniteMemoryAdversary, PolicyError};
use crate::bellman::{argmin, default_iteration_cap, stopping_threshold, sup_distance};
use crate::model::{Ambiguity, Kernel, Matrix, MixedRadix, RobustMdp, Row, SetKind};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap, VecDeque};

/// What the adversary may condition on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdversaryClass {
    /// One kernel for the whole run, depending on the current state only.
    Stationary,
    /// Time-indexed kernels, depending on the current state and the clock.
    Markov,
    /// May also see the controller's memory.
    HistoryObserving,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RobustOptions {
    pub tol: f64,
    pub class: AdversaryClass,
    /// Grid points allowed across all convex-hull sets.
    pub grid_cap: usize,
    /// Stationary kernels allowed in an enumeration; also the total
    /// search-node budget for the Markov class.
    pub product_cap: usize,
    /// Augmented (memory, state) pairs allowed.
    pub node_cap: usize,
}

impl RobustOptions {
    pub fn new(tol: f64) -> Self {
        RobustOptions {
            tol,
            class: AdversaryClass::Stationary,
            grid_cap: 4096,
            product_cap: 100_000,
            node_cap: 1_000_000,
        }
    }

    pub fn with_class(mut self, class: AdversaryClass) -> Self {
        self.class = class;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorstCase {
    /// A stationary kernel, one `|A| x |S|` matrix per state.
    Kernel(Vec<Matrix>),
    /// Vertex choices per augmented node: the node's state and, per
    /// S-rectangular set, one vertex index or, per SA set, one per action.
    Augmented { states: Vec<usize>, choices: Vec<Vec<usize>> },
    /// One kernel per time step, then the first vertex everywhere.
    Schedule(Vec<Vec<Matrix>>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustValue {
    /// Value of the worst adversary found (an upper bound on the infimum).
    pub value: f64,
    /// Certified lower bound on the infimum.
    pub lower_bound: f64,
    /// Whether `value` is the infimum up to linear-solve round-off.
    pub exact: bool,
    pub class: AdversaryClass,
    /// Number of stationary kernels compared, when enumerating.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub candidates: Option<usize>,
    pub worst: WorstCase,
}

pub fn robust_evaluate<C: Controller + Sync>(model: &RobustMdp, pi: &C, mu: &[f64], tol: f64) -> Result<RobustValue, PolicyError> {
    robust_evaluate_with(model, pi, mu, RobustOptions::new(tol))
}

pub fn robust_evaluate_with<C: Controller + Sync>(
    model: &RobustMdp,
    pi: &C,
    mu: &[f64],
    opts: RobustOptions,
) -> Result<RobustValue, PolicyError> {
    if matches!(model.ambiguity, Ambiguity::General(_)) {
        return Err(PolicyError::General);
    }
    if mu.len() != model.n_states() {
        return Err(PolicyError::Invalid("initial distribution has the wrong length".into()));
    }
    let graph = NodeGraph::build(model, pi, mu, opts.node_cap)?;
    let single_memory = graph.memories == 1;
    if opts.class == AdversaryClass::HistoryObserving || single_memory {
        // against a one-memory controller the adversary's problem is a plain
        // MDP on states, where a stationary choice is optimal
        let mut out = graph.solve(model, opts.tol)?;
        out.class = opts.class;
        if single_memory {
            let kernel = graph.state_kernel(model, &out.worst);
            out.worst = WorstCase::Kernel(kernel);
        }
        return Ok(out);
    }
    if opts.class == AdversaryClass::Markov {
        return markov_search(model, pi, mu, &graph, opts);
    }
    enumerate_stationary(model, pi, mu, &graph.reachable_states(model.n_states()), opts)
}

/// Reachable (controller memory, state) pairs under every adversary at once.
struct NodeGraph {
    states: Vec<usize>,
    starts: Vec<(usize, f64)>,
    /// Per node: `(action, probability, successor per next state)`.
    moves: Vec<Vec<(usize, f64, Vec<usize>)>>,
    memories: usize,
}

impl NodeGraph {
    fn build<C: Controller>(model: &RobustMdp, pi: &C, mu: &[f64], cap: usize) -> Result<Self, PolicyError> {
        let ns = model.n_states();
        let na = model.n_actions();
        // next states possible under some element of the set
        let support: Vec<Vec<bool>> = (0..ns * na)
            .map(|i| {
                let rows = crate::bellman::marginal_rows(model, i / na, i % na);
                (0..ns).map(|s2| rows.iter().any(|r| r[s2] > 0.0)).collect()
            })
            .collect();
        let mut keys: Vec<(C::Memory, usize)> = Vec::new();
        let mut index: HashMap<(C::Memory, usize), usize> = HashMap::new();
        let mut queue = VecDeque::new();
        let mut starts = Vec::new();
        for (s, &w) in mu.iter().enumerate() {
            if w > 0.0 {
                let key = (pi.initial_memory(), s);
                index.insert(key.clone(), keys.len());
                keys.push(key);
                queue.push_back(keys.len() - 1);
                starts.push((keys.len() - 1, w));
            }
        }
        let mut moves: Vec<Vec<(usize, f64, Vec<usize>)>> = Vec::new();
        while let Some(i) = queue.pop_front() {
            let (mc, s) = keys[i].clone();
            let rule = pi.decide(&mc, s).into_owned();
            let mut node_moves = Vec::new();
            for (a, &pa) in rule.iter().enumerate() {
                if pa <= 0.0 {
                    continue;
                }
                let mut succ = vec![usize::MAX; ns];
                for s2 in 0..ns {
                    if !support[s * na + a][s2] {
                        continue;
                    }
                    let key = (pi.update(&mc, s, a, s2), s2);
                    let j = match index.get(&key) {
                        Some(&j) => j,
                        None => {
                            if keys.len() >= cap {
                                return Err(PolicyError::TooLarge {
                                    what: "augmented (memory, state) space".into(),
                                    count: cap as u128 + 1,
                                    cap,
                                });
                            }
                            index.insert(key.clone(), keys.len());
                            keys.push(key);
                            queue.push_back(keys.len() - 1);
                            keys.len() - 1
                        }
                    };
                    succ[s2] = j;
                }
                node_moves.push((a, pa, succ));
            }
            if moves.len() <= i {
                moves.resize(i + 1, Vec::new());
            }
            moves[i] = node_moves;
        }
        moves.resize(keys.len(), Vec::new());
        let mut mems: HashMap<&C::Memory, ()> = HashMap::new();
        for (m, _) in &keys {
            mems.insert(m, ());
        }
        Ok(NodeGraph { states: keys.iter().map(|k| k.1).collect(), starts, moves, memories: mems.len() })
    }

    fn reachable_states(&self, ns: usize) -> Vec<bool> {
        let mut r = vec![false; ns];
        for &s in &self.states {
            r[s] = true;
        }
        r
    }

    /// Value of node `z` against each adversary choice, given continuation `w`.
    fn backup(&self, model: &RobustMdp, z: usize, w: &[f64]) -> (f64, Vec<usize>) {
        let s = self.states[z];
        let na = model.n_actions();
        let cont = |succ: &[usize], row: &[f64]| -> f64 {
            row.iter().zip(succ).map(|(p, &j)| if *p > 0.0 { p * w[j] } else { 0.0 }).sum()
        };
        match &model.ambiguity {
            Ambiguity::S(sets) => {
                let (k, v) = argmin(sets[s].vertices.iter().map(|m| {
                    self.moves[z]
                        .iter()
                        .map(|(a, pa, succ)| pa * (model.reward(s, *a) + model.gamma * cont(succ, &m[*a])))
                        .sum::<f64>()
                }))
                .expect("non-empty set");
                (v, vec![k])
            }
            Ambiguity::Sa(sets) => {
                let mut choice = vec![0; na];
                let mut total = 0.0;
                for (a, pa, succ) in &self.moves[z] {
                    let (k, c) = argmin(sets[s * na + a].vertices.iter().map(|row| cont(succ, row))).expect("non-empty");
                    choice[*a] = k;
                    total += pa * (model.reward(s, *a) + model.gamma * c);
                }
                (total, choice)
            }
            Ambiguity::General(_) => unreachable!("refused earlier"),
        }
    }

    fn row_for<'a>(&self, model: &'a RobustMdp, s: usize, a: usize, choice: &[usize]) -> &'a Row {
        match &model.ambiguity {
            Ambiguity::S(sets) => &sets[s].vertices[choice[0]][a],
            Ambiguity::Sa(sets) => &sets[s * model.n_actions() + a].vertices[choice[a]],
            Ambiguity::General(_) => unreachable!("refused earlier"),
        }
    }

    /// Value iteration for the adversary: value to go and choice per node.
    fn adversary_values(&self, model: &RobustMdp, tol: f64) -> Result<(Vec<f64>, Vec<Vec<usize>>), PolicyError> {
        let n = self.states.len();
        let cap = default_iteration_cap(model.gamma, tol);
        let threshold = stopping_threshold(model.gamma, tol);
        let mut w = vec![0.0; n];
        for _ in 0..cap {
            let (next, ch): (Vec<f64>, Vec<Vec<usize>>) = (0..n).map(|z| self.backup(model, z, &w)).unzip();
            let residual = sup_distance(&next, &w);
            w = next;
            if residual <= threshold {
                return Ok((w, ch));
            }
        }
        Err(PolicyError::Bellman(crate::bellman::BellmanError::IterationCap { iterations: cap, residual: f64::NAN }))
    }

    /// Adversary values, then an exact solve of the chain induced by its choices.
    fn solve(&self, model: &RobustMdp, tol: f64) -> Result<RobustValue, PolicyError> {
        let n = self.states.len();
        let (w, choices) = self.adversary_values(model, tol)?;
        let bound: f64 = self.starts.iter().map(|&(z, p)| p * w[z]).sum::<f64>() - tol;
        let (value, exact) = if n <= super::DEFAULT_LINEAR_CAP {
            let mut reward = vec![0.0; n];
            let mut next = vec![Vec::new(); n];
            for z in 0..n {
                let s = self.states[z];
                for (a, pa, succ) in &self.moves[z] {
                    reward[z] += pa * model.reward(s, *a);
                    for (s2, &p) in self.row_for(model, s, *a, &choices[z]).iter().enumerate() {
                        if p > 0.0 {
                            next[z].push((succ[s2], pa * p));
                        }
                    }
                }
            }
            match solve_linear(&reward, &next, model.gamma) {
                Some((v, res)) => {
                    let value: f64 = self.starts.iter().map(|&(z, p)| p * v[z]).sum();
                    (value, res / (1.0 - model.gamma) <= 1e-9 && value - bound <= 2.0 * tol + 1e-12)
                }
                None => (bound + tol, false),
            }
        } else {
            (bound + tol, false)
        };
        Ok(RobustValue {
            value,
            lower_bound: bound.min(value),
            exact,
            class: AdversaryClass::HistoryObserving,
            candidates: None,
            worst: WorstCase::Augmented { states: self.states.clone(), choices },
        })
    }

    /// Collapses one-memory choices into a per-state kernel.
    fn state_kernel(&self, model: &RobustMdp, worst: &WorstCase) -> Vec<Matrix> {
        let ns = model.n_states();
        let na = model.n_actions();
        let mut per_state: Vec<Vec<usize>> = vec![vec![0; na]; ns];
        if let WorstCase::Augmented { states, choices } = worst {
            for (s, c) in states.iter().zip(choices) {
                if !c.is_empty() {
                    per_state[*s] = c.clone();
                }
            }
        }
        (0..ns)
            .map(|s| {
                let c = &per_state[s];
                match &model.ambiguity {
                    Ambiguity::S(sets) => sets[s].vertices[c[0]].clone(),
                    Ambiguity::Sa(sets) => (0..na).map(|a| sets[s * na + a].vertices[c[a]].clone()).collect(),
                    Ambiguity::General(_) => unreachable!("refused earlier"),
                }
            })
            .collect()
    }
}

/// One independent adversary choice: a state (S) or state-action pair (SA).
struct Slot {
    state: usize,
    action: Option<usize>,
    /// Candidate elements, each a matrix (S) or a one-row matrix (SA).
    candidates: Vec<Matrix>,
    /// Worst row l1 distance from any set element to the nearest candidate.
    resolution: f64,
}

fn enumerate_stationary<C: Controller + Sync>(
    model: &RobustMdp,
    pi: &C,
    mu: &[f64],
    reachable: &[bool],
    opts: RobustOptions,
) -> Result<RobustValue, PolicyError> {
    let ns = model.n_states();
    let na = model.n_actions();
    // base kernel uses the first vertex everywhere; slots override it
    let mut base: Vec<Matrix> = match &model.ambiguity {
        Ambiguity::S(sets) => sets.iter().map(|p| p.vertices[0].clone()).collect(),
        Ambiguity::Sa(sets) => (0..ns).map(|s| (0..na).map(|a| sets[s * na + a].vertices[0].clone()).collect()).collect(),
        Ambiguity::General(_) => unreachable!("refused earlier"),
    };
    let mut raw: Vec<(usize, Option<usize>, SetKind, Vec<Matrix>)> = Vec::new();
    match &model.ambiguity {
        Ambiguity::S(sets) => {
            for s in (0..ns).filter(|&s| reachable[s] && sets[s].len() > 1) {
                raw.push((s, None, sets[s].kind, sets[s].vertices.clone()));
            }
        }
        Ambiguity::Sa(sets) => {
            for s in (0..ns).filter(|&s| reachable[s]) {
                for a in 0..na {
                    let p = &sets[s * na + a];
                    if p.len() > 1 {
                        raw.push((s, Some(a), p.kind, p.vertices.iter().map(|r| vec![r.clone()]).collect()));
                    }
                }
            }
        }
        Ambiguity::General(_) => unreachable!("refused earlier"),
    }
    let hulls = raw.iter().filter(|r| r.2 == SetKind::ConvexHull).count();
    let budget = if hulls == 0 { 1 } else { ((opts.grid_cap as f64).powf(1.0 / hulls as f64).floor() as usize).max(1) };
    let slots: Vec<Slot> = raw
        .into_iter()
        .map(|(state, action, kind, verts)| match kind {
            SetKind::Finite => Slot { state, action, candidates: verts, resolution: 0.0 },
            SetKind::ConvexHull => hull_grid(state, action, verts, budget),
        })
        .collect();
    let sizes: Vec<usize> = slots.iter().map(|s| s.candidates.len()).collect();
    let count = sizes.iter().fold(1u128, |acc, &k| acc.saturating_mul(k as u128));
    if count > opts.product_cap as u128 {
        return Err(PolicyError::TooLarge { what: "stationary adversary enumeration".into(), count, cap: opts.product_cap });
    }
    let count = count as usize;
    let kernel_for = |mut idx: usize, base: &mut Vec<Matrix>| {
        for (slot, &size) in slots.iter().zip(&sizes).rev() {
            let c = &slot.candidates[idx % size];
            idx /= size;
            match slot.action {
                None => base[slot.state] = c.clone(),
                Some(a) => base[slot.state][a] = c[0].clone(),
            }
        }
    };
    let eval_opts = EvalOptions::new(opts.tol);
    let results: Vec<Result<(f64, f64, bool), PolicyError>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut mats = base.clone();
            kernel_for(i, &mut mats);
            let rows: Vec<Row> = mats.into_iter().flatten().collect();
            let kernel = Kernel::from_rows(ns, na, &rows)?;
            let r = evaluate_exact_with(model, pi, &kernel, mu, eval_opts)?;
            Ok((r.value, r.error_bound, r.method == EvalMethod::LinearSolve))
        })
        .collect();
    let mut best: Option<(usize, f64)> = None;
    let mut lower = f64::INFINITY;
    let mut all_linear = true;
    for (i, r) in results.into_iter().enumerate() {
        let (v, err, linear) = r?;
        all_linear &= linear;
        lower = lower.min(v - err);
        if best.is_none_or(|(_, b)| v < b) {
            best = Some((i, v));
        }
    }
    let (bi, value) = best.expect("at least one kernel");
    kernel_for(bi, &mut base);
    let d = slots.iter().fold(0.0f64, |m, s| m.max(s.resolution));
    let gamma = model.gamma;
    let lipschitz = gamma / (2.0 * (1.0 - gamma) * (1.0 - gamma));
    Ok(RobustValue {
        value,
        lower_bound: lower - lipschitz * d,
        exact: d == 0.0 && all_linear,
        class: AdversaryClass::Stationary,
        candidates: Some(count),
        worst: WorstCase::Kernel(base),
    })
}

/// Branch and bound over time-indexed vertex choices.
///
/// The history-observing value to go `w` bounds every continuation from
/// below, so `acc + gamma^t E[w]` never decreases along a branch. Leaves at
/// the horizon give a lower bound on the Markov infimum.
struct MarkovSearch<'a> {
    model: &'a RobustMdp,
    graph: &'a NodeGraph,
    w: &'a [f64],
    horizon: usize,
    budget: usize,
    visited: usize,
    best: f64,
    best_choices: Vec<Vec<Vec<usize>>>,
    stack: Vec<Vec<Vec<usize>>>,
}

type Dist = Vec<(usize, f64)>;

impl MarkovSearch<'_> {
    fn bound(&self, dist: &Dist) -> f64 {
        dist.iter().map(|&(z, p)| p * self.w[z]).sum()
    }

    /// Returns false once the node budget is exhausted.
    fn visit(&mut self, t: usize, dist: Dist, acc: f64) -> bool {
        self.visited += 1;
        if self.visited > self.budget {
            return false;
        }
        let discount = self.model.gamma.powi(t as i32);
        if acc + discount * self.bound(&dist) >= self.best {
            return true;
        }
        if t == self.horizon {
            self.best = acc + discount * self.bound(&dist);
            self.best_choices = self.stack.clone();
            return true;
        }
        let acc = acc + discount * step_reward(self.model, self.graph, &dist);
        let mut children: Vec<(f64, Vec<Vec<usize>>, Dist)> = step_choices(self.model, self.graph, &dist)
            .into_iter()
            .map(|(choice, next)| (self.bound(&next), choice, next))
            .collect();
        children.sort_by(|x, y| x.0.total_cmp(&y.0));
        for (_, choice, next) in children {
            self.stack.push(choice);
            let ok = self.visit(t + 1, next, acc);
            self.stack.pop();
            if !ok {
                return false;
            }
        }
        true
    }
}

fn step_reward(model: &RobustMdp, graph: &NodeGraph, dist: &Dist) -> f64 {
    dist.iter()
        .flat_map(|&(z, p)| graph.moves[z].iter().map(move |(a, pa, _)| p * pa * model.reward(graph.states[z], *a)))
        .sum()
}

/// Every vertex choice for the states in `dist`, with the distribution it leads to.
fn step_choices(model: &RobustMdp, graph: &NodeGraph, dist: &Dist) -> Vec<(Vec<Vec<usize>>, Dist)> {
    let ns = model.n_states();
    let na = model.n_actions();
    let mut slots: Vec<(usize, usize, usize)> = Vec::new();
    for &(z, _) in dist {
        let s = graph.states[z];
        match &model.ambiguity {
            Ambiguity::S(sets) if sets[s].len() > 1 => slots.push((s, 0, sets[s].len())),
            Ambiguity::Sa(sets) => {
                for (a, _, _) in &graph.moves[z] {
                    if sets[s * na + a].len() > 1 {
                        slots.push((s, *a, sets[s * na + a].len()));
                    }
                }
            }
            _ => {}
        }
    }
    slots.sort_unstable();
    slots.dedup();
    let width = if matches!(model.ambiguity, Ambiguity::S(_)) { 1 } else { na };
    MixedRadix::new(slots.iter().map(|x| x.2).collect())
        .map(|combo| {
            let mut choice = vec![vec![0; width]; ns];
            for (&(s, a, _), &k) in slots.iter().zip(&combo) {
                choice[s][a] = k;
            }
            let mut next: BTreeMap<usize, f64> = BTreeMap::new();
            for &(z, p) in dist {
                let s = graph.states[z];
                for (a, pa, succ) in &graph.moves[z] {
                    for (s2, &q) in graph.row_for(model, s, *a, &choice[s]).iter().enumerate() {
                        if q > 0.0 {
                            *next.entry(succ[s2]).or_insert(0.0) += p * pa * q;
                        }
                    }
                }
            }
            (choice, next.into_iter().collect())
        })
        .collect()
}

fn markov_search<C: Controller + Sync>(
    model: &RobustMdp,
    pi: &C,
    mu: &[f64],
    graph: &NodeGraph,
    opts: RobustOptions,
) -> Result<RobustValue, PolicyError> {
    let ns = model.n_states();
    let na = model.n_actions();
    let gamma = model.gamma;
    let (w, _) = graph.adversary_values(model, opts.tol)?;
    let r_max = model.rewards.iter().copied().fold(0.0, f64::max);
    let max_horizon = ((opts.tol * (1.0 - gamma) / r_max.max(1e-300)).ln() / gamma.ln()).ceil().max(1.0) as usize;
    let start: Dist = graph.starts.clone();
    let mut lower = start.iter().map(|&(z, p)| p * w[z]).sum::<f64>();
    let mut schedule: Vec<Vec<Vec<usize>>> = Vec::new();
    let mut used = 0;
    for horizon in 1..=max_horizon {
        let mut search = MarkovSearch {
            model,
            graph,
            w: &w,
            horizon,
            budget: opts.product_cap - used,
            visited: 0,
            best: f64::INFINITY,
            best_choices: Vec::new(),
            stack: Vec::new(),
        };
        let finished = search.visit(0, start.clone(), 0.0);
        used += search.visited.min(opts.product_cap - used);
        if !finished {
            break;
        }
        let (upper, extended) = greedy_extension(model, graph, &w, &search.best_choices, &start, max_horizon);
        lower = lower.max(search.best);
        schedule = extended;
        if upper - lower <= opts.tol {
            break;
        }
    }
    let kernel = |choice: Option<&Vec<Vec<usize>>>| -> Vec<Matrix> {
        (0..ns)
            .map(|s| {
                let c = choice.map(|c| c[s].as_slice()).unwrap_or(&[]);
                let k = |i: usize| c.get(i).copied().unwrap_or(0);
                match &model.ambiguity {
                    Ambiguity::S(sets) => sets[s].vertices[k(0)].clone(),
                    Ambiguity::Sa(sets) => (0..na).map(|a| sets[s * na + a].vertices[k(a)].clone()).collect(),
                    Ambiguity::General(_) => unreachable!("refused earlier"),
                }
            })
            .collect()
    };
    let prefix: Vec<Vec<Matrix>> = schedule.iter().map(|c| kernel(Some(c))).collect();
    let adversary = FiniteMemoryAdversary::markov(model, prefix.clone(), vec![kernel(None)])?;
    let eval = evaluate_exact_with(model, pi, &adversary, mu, EvalOptions::new(opts.tol))?;
    let lower = (lower - opts.tol).min(eval.value);
    Ok(RobustValue {
        value: eval.value,
        lower_bound: lower,
        exact: eval.value - lower <= 2.0 * opts.tol + eval.error_bound,
        class: AdversaryClass::Markov,
        candidates: None,
        worst: WorstCase::Schedule(prefix),
    })
}

/// Follows `prefix`, then picks the choice with the smallest bound at each
/// step up to `steps`. Returns an upper bound on the resulting value.
fn greedy_extension(
    model: &RobustMdp,
    graph: &NodeGraph,
    w: &[f64],
    prefix: &[Vec<Vec<usize>>],
    start: &Dist,
    steps: usize,
) -> (f64, Vec<Vec<Vec<usize>>>) {
    let gamma = model.gamma;
    let r_max = model.rewards.iter().copied().fold(0.0, f64::max);
    let mut dist = start.clone();
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(steps);
    for t in 0..steps {
        acc += gamma.powi(t as i32) * step_reward(model, graph, &dist);
        let options = step_choices(model, graph, &dist);
        let pick = match prefix.get(t) {
            Some(c) => options.into_iter().find(|(choice, _)| choice == c),
            None => options
                .into_iter()
                .map(|(choice, next)| (next.iter().map(|&(z, p)| p * w[z]).sum::<f64>(), choice, next))
                .min_by(|x, y| x.0.total_cmp(&y.0))
                .map(|(_, c, n)| (c, n)),
        };
        let (choice, next) = pick.expect("prefix choices come from the same enumeration");
        out.push(choice);
        dist = next;
    }
    (acc + gamma.powi(steps as i32) * r_max / (1.0 - gamma), out)
}

/// Grid points `sum_k (n_k / N) V_k` with as fine an `N` as `budget` allows.
fn hull_grid(state: usize, action: Option<usize>, verts: Vec<Matrix>, budget: usize) -> Slot {
    let k = verts.len();
    let mut n = 1usize;
    while compositions(n + 1, k) <= budget as u128 {
        n += 1;
    }
    let diam = verts
        .iter()
        .flat_map(|x| verts.iter().map(move |y| (x, y)))
        .flat_map(|(x, y)| x.iter().zip(y).map(|(r1, r2)| r1.iter().zip(r2).map(|(a, b)| (a - b).abs()).sum::<f64>()))
        .fold(0.0f64, f64::max);
    let mut candidates = Vec::new();
    let mut parts = vec![0usize; k];
    for_each_composition(n, 0, &mut parts, &mut |w| {
        let mut m: Matrix = verts[0].iter().map(|r| vec![0.0; r.len()]).collect();
        for (j, &c) in w.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let lam = c as f64 / n as f64;
            for (mr, vr) in m.iter_mut().zip(&verts[j]) {
                for (x, y) in mr.iter_mut().zip(vr) {
                    *x += lam * y;
                }
            }
        }
        candidates.push(m);
    });
    // every weight vector lies within l1 distance k/N of a grid point
    Slot { state, action, candidates, resolution: 0.5 * (k as f64 / n as f64) * diam }
}

fn compositions(n: usize, k: usize) -> u128 {
    // C(n + k - 1, k - 1)
    let mut c: u128 = 1;
    for i in 1..k as u128 {
        c = c * (n as u128 + i) / i;
    }
    c
}

fn for_each_composition(remaining: usize, pos: usize, parts: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
    if pos + 1 == parts.len() {
        parts[pos] = remaining;
        f(parts);
        return;
    }
    for c in (0..=remaining).rev() {
        parts[pos] = c;
        for_each_composition(remaining - c, pos + 1, parts, f);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn composition_counts() {
        assert_eq!(compositions(4, 2), 5);
        assert_eq!(compositions(2, 3), 6);
        let mut n = 0;
        let mut parts = vec![0; 3];
        for_each_composition(2, 0, &mut parts, &mut |p| {
            assert_eq!(p.iter().sum::<usize>(), 2);
            n += 1;
        });
        assert_eq!(n, 6);
    }
}
