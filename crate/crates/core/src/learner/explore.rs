use super::{EmpiricalKernel, LearnerError};
use crate::model::{unit, Kernel};
use crate::sampling::{sample_index, stream_rng};
use rand::Rng;
use serde::Serialize;

/// A transition sampler whose kernel the learner cannot read.
pub trait Environment {
    fn n_states(&self) -> usize;
    fn n_actions(&self) -> usize;
    /// Next state after `action` at `state`, drawing one uniform.
    fn sample<R: Rng + ?Sized>(&self, state: usize, action: usize, rng: &mut R) -> usize;
}

/// A stationary kernel behind the [`Environment`] interface.
#[derive(Clone, Debug)]
pub struct HiddenKernel {
    kernel: Kernel,
}

impl HiddenKernel {
    pub fn new(kernel: Kernel) -> Self {
        HiddenKernel { kernel }
    }
}

impl Environment for HiddenKernel {
    fn n_states(&self) -> usize {
        self.kernel.n_states()
    }

    fn n_actions(&self) -> usize {
        self.kernel.n_actions()
    }

    fn sample<R: Rng + ?Sized>(&self, state: usize, action: usize, rng: &mut R) -> usize {
        sample_index(self.kernel.row(state, action), rng)
    }
}

/// Progress of the pair-by-pair sampling schedule. Pairs are ordered
/// state-major: pair `j` is `(j / |A|, j % |A|)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct ExplorationState {
    /// Time of the next decision.
    pub t: u64,
    /// Current pair; equals `|Z|` once every pair is complete.
    pub pair: usize,
    /// Samples of the current pair so far.
    pub collected: u64,
    /// Observed next states per pair.
    pub samples: Vec<Vec<u32>>,
}

impl ExplorationState {
    pub fn new(n_pairs: usize) -> Self {
        ExplorationState { t: 0, pair: 0, collected: 0, samples: vec![Vec::new(); n_pairs] }
    }

    pub fn success(&self, m: u64) -> bool {
        m >= 1 && self.pair == self.samples.len()
    }

    /// The pair sampled by acting now at `state`, if any.
    pub fn target(&self, state: usize, n_actions: usize, m: u64) -> Option<usize> {
        (m >= 1 && self.pair < self.samples.len() && self.pair / n_actions == state).then_some(self.pair)
    }

    pub fn decision(&self, state: usize, n_actions: usize, m: u64) -> Vec<f64> {
        match self.target(state, n_actions, m) {
            Some(j) => unit(n_actions, j % n_actions),
            None => vec![1.0 / n_actions as f64; n_actions],
        }
    }

    /// Records one transition. Samples whose next state arrives after time `n` are dropped.
    pub fn record(&mut self, state: usize, next: usize, n_actions: usize, n: u64, m: u64) {
        if let Some(j) = self.target(state, n_actions, m) {
            if self.t < n {
                self.samples[j].push(next as u32);
                self.collected += 1;
                if self.collected == m {
                    self.pair += 1;
                    self.collected = 0;
                }
            }
        }
        self.t += 1;
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TraceStep {
    pub t: u64,
    pub state: usize,
    pub action: usize,
    /// `(pair, sample index)` when the step collects a sample.
    pub sample: Option<(usize, u64)>,
    pub next: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Exploration {
    pub state: ExplorationState,
    pub kernel: EmpiricalKernel,
    pub trace: Vec<TraceStep>,
    /// State at time `n`.
    pub final_state: usize,
}

/// Runs the exploration phase for `n` transitions from an initial state drawn from `mu`.
/// Uses stream 0 of `seed` with the same draws as a policy rollout.
pub fn explore<E: Environment>(env: &E, mu: &[f64], n: u64, m: u64, seed: u64) -> Result<Exploration, LearnerError> {
    let (ns, na) = (env.n_states(), env.n_actions());
    if mu.len() != ns || ns == 0 || na == 0 {
        return Err(LearnerError::Invalid("initial distribution does not match the environment".into()));
    }
    let mut rng = stream_rng(seed, 0);
    let mut st = ExplorationState::new(ns * na);
    let mut s = sample_index(mu, &mut rng);
    let mut trace = Vec::with_capacity(n as usize);
    for _ in 0..n {
        let a = sample_index(&st.decision(s, na, m), &mut rng);
        let s2 = env.sample(s, a, &mut rng);
        let sample = st.target(s, na, m).map(|j| (j, st.collected));
        trace.push(TraceStep { t: st.t, state: s, action: a, sample, next: s2 });
        st.record(s, s2, na, n, m);
        s = s2;
    }
    let kernel = EmpiricalKernel::from_samples(ns, na, m, &st.samples);
    Ok(Exploration { state: st, kernel, trace, final_state: s })
}

/// Replays a trace and checks that pair `j` gets its `k`-th sample only after
/// pairs `0..j` are complete and after its own first `k - 1` samples, and that
/// no sampling opportunity is skipped.
pub fn check_schedule_order(trace: &[TraceStep], n_states: usize, n_actions: usize, m: u64) -> Result<(), String> {
    let nz = n_states * n_actions;
    let (mut j, mut k) = (0usize, 0u64);
    for step in trace {
        let due = m >= 1 && j < nz && step.state == j / n_actions;
        match (due, step.sample) {
            (true, Some((pj, pk))) => {
                if pj != j || pk != k {
                    return Err(format!("t={}: sample ({pj}, {pk}) out of order, expected ({j}, {k})", step.t));
                }
                if step.action != j % n_actions {
                    return Err(format!("t={}: pair {j} sampled with action {}", step.t, step.action));
                }
                k += 1;
                if k == m {
                    j += 1;
                    k = 0;
                }
            }
            (true, None) => return Err(format!("t={}: pair {j} was due but not sampled", step.t)),
            (false, Some((pj, _))) => return Err(format!("t={}: pair {pj} sampled out of turn", step.t)),
            (false, None) => {}
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cycle2() -> HiddenKernel {
        HiddenKernel::new(Kernel::from_rows(2, 1, &[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap())
    }

    #[test]
    fn deterministic_cycle_is_sampled_in_two_steps() {
        // from state 0: t=0 samples (0,a1) -> 1, t=1 samples (1,a1) -> 0
        let e = explore(&cycle2(), &[1.0, 0.0], 2, 1, 7).unwrap();
        assert!(e.state.success(1));
        assert_eq!(e.kernel.rows, vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert_eq!(e.trace.iter().map(|s| s.sample).collect::<Vec<_>>(), vec![Some((0, 0)), Some((1, 0))]);
        check_schedule_order(&e.trace, 2, 1, 1).unwrap();
    }

    #[test]
    fn starting_elsewhere_costs_one_step() {
        // from state 1: t=0 navigates, t=1 samples pair 0, t=2 samples pair 1
        let e = explore(&cycle2(), &[0.0, 1.0], 2, 1, 7).unwrap();
        assert!(!e.state.success(1));
        assert_eq!(e.kernel.rows, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let e = explore(&cycle2(), &[0.0, 1.0], 3, 1, 7).unwrap();
        assert!(e.state.success(1));
    }

    #[test]
    fn tiny_budget_falls_back() {
        let e = explore(&cycle2(), &[1.0, 0.0], 1, 3, 1).unwrap();
        assert!(!e.kernel.success);
        assert_eq!(e.kernel.rows[0], vec![1.0, 0.0]);
    }

    #[test]
    fn tampered_trace_is_rejected() {
        let mut e = explore(&cycle2(), &[1.0, 0.0], 4, 2, 3).unwrap();
        check_schedule_order(&e.trace, 2, 1, 2).unwrap();
        e.trace[1].sample = Some((1, 0));
        assert!(check_schedule_order(&e.trace, 2, 1, 2).is_err());
    }
}
