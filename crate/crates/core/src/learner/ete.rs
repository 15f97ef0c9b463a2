use super::{evi, EmpiricalKernel, ExplorationState, LearnerError};
use crate::model::Row;
use crate::policy::Controller;
use std::borrow::Cow;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

/// Largest `m |Z|` the policy memory may have to store.
pub const DEFAULT_COUNTER_CAP: usize = 1 << 24;

/// Frozen exploitation rules, compared bitwise.
#[derive(Clone, Debug)]
pub struct ExploitRules(pub Arc<Vec<Row>>);

impl PartialEq for ExploitRules {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
            || (self.0.len() == other.0.len()
                && self.0.iter().flatten().zip(other.0.iter().flatten()).all(|(a, b)| a.to_bits() == b.to_bits()))
    }
}

impl Eq for ExploitRules {}

impl Hash for ExploitRules {
    fn hash<H: Hasher>(&self, state: &mut H) {
        for x in self.0.iter().flatten() {
            x.to_bits().hash(state);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum EteMemory {
    Explore(ExplorationState),
    Exploit(ExploitRules),
}

/// Explore for decisions `0..=n`, then play the empirical greedy rule.
#[derive(Clone, Debug)]
pub struct EtePolicy {
    n_states: usize,
    n_actions: usize,
    rewards: Vec<f64>,
    gamma: f64,
    n: u64,
    m: u64,
    tol: f64,
}

impl EtePolicy {
    pub fn new(rewards: Vec<f64>, n_states: usize, n_actions: usize, gamma: f64, n: u64, m: u64, tol: f64) -> Result<Self, LearnerError> {
        Self::with_cap(rewards, n_states, n_actions, gamma, n, m, tol, DEFAULT_COUNTER_CAP)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn with_cap(
        rewards: Vec<f64>,
        n_states: usize,
        n_actions: usize,
        gamma: f64,
        n: u64,
        m: u64,
        tol: f64,
        cap: usize,
    ) -> Result<Self, LearnerError> {
        if rewards.len() != n_states * n_actions || n_states == 0 || n_actions == 0 {
            return Err(LearnerError::Invalid("rewards must have one entry per state-action pair".into()));
        }
        if !(gamma > 0.0 && gamma < 1.0) || n == 0 || !(tol > 0.0) {
            return Err(LearnerError::Invalid("need gamma in (0, 1), n >= 1 and tol > 0".into()));
        }
        let count = m as u128 * rewards.len() as u128;
        if count > cap as u128 {
            return Err(LearnerError::TooLarge { count, cap });
        }
        Ok(EtePolicy { n_states, n_actions, rewards, gamma, n, m, tol })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    /// The exploitation rules learned from `state`.
    pub fn exploit_rules(&self, state: &ExplorationState) -> Result<Vec<Row>, LearnerError> {
        let k = EmpiricalKernel::from_samples(self.n_states, self.n_actions, self.m, &state.samples);
        Ok(evi(&k, &self.rewards, self.gamma, self.tol)?.rules)
    }
}

impl Controller for EtePolicy {
    type Memory = EteMemory;

    fn initial_memory(&self) -> EteMemory {
        EteMemory::Explore(ExplorationState::new(self.n_states * self.n_actions))
    }

    fn decide(&self, memory: &EteMemory, state: usize) -> Cow<'_, [f64]> {
        match memory {
            EteMemory::Explore(st) => Cow::Owned(st.decision(state, self.n_actions, self.m)),
            EteMemory::Exploit(rules) => Cow::Owned(rules.0[state].clone()),
        }
    }

    fn update(&self, memory: &EteMemory, state: usize, _action: usize, next: usize) -> EteMemory {
        match memory {
            EteMemory::Explore(st) => {
                let mut st = st.clone();
                st.record(state, next, self.n_actions, self.n, self.m);
                if st.t > self.n {
                    // rewards and gamma were validated, so the solve only fails on a pathological tolerance
                    let rules = self.exploit_rules(&st).expect("empirical value iteration converges");
                    EteMemory::Exploit(ExploitRules(Arc::new(rules)))
                } else {
                    EteMemory::Explore(st)
                }
            }
            EteMemory::Exploit(_) => memory.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::{explore, HiddenKernel};
    use crate::model::{ControllerSet, Ambiguity, DistributionSet, Kernel, RobustMdp};
    use crate::policy::rollout;
    use crate::sampling::stream_rng;

    fn swap_model() -> (RobustMdp, Kernel) {
        let rows = vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![0.5, 0.5], vec![0.5, 0.5]];
        let model = RobustMdp::new(
            vec!["x".into(), "y".into()],
            vec!["go".into(), "coin".into()],
            vec![0.0, 0.2, 1.0, 0.5],
            0.9,
            Ambiguity::Sa(rows.iter().map(|r| DistributionSet::singleton(r.clone())).collect()),
            ControllerSet::simplex(),
        )
        .unwrap();
        (model, Kernel::from_rows(2, 2, &rows).unwrap())
    }

    #[test]
    fn policy_replays_the_exploration_trace() {
        let (model, k) = swap_model();
        let n = 40;
        let pi = EtePolicy::new(model.rewards.clone(), 2, 2, 0.9, n, 3, 1e-10).unwrap();
        for seed in 0..5 {
            let e = explore(&HiddenKernel::new(k.clone()), &[1.0, 0.0], n, 3, seed).unwrap();
            let (traj, mem) = rollout(&model, &pi, &k, &[1.0, 0.0], n as usize + 1, &mut stream_rng(seed, 0));
            assert_eq!(traj.actions[..n as usize], e.trace.iter().map(|s| s.action).collect::<Vec<_>>()[..]);
            let EteMemory::Exploit(rules) = mem else { panic!("still exploring") };
            assert_eq!(*rules.0, pi.exploit_rules(&e.state).unwrap());
        }
    }

    #[test]
    fn identical_seeds_give_identical_actions() {
        let (model, k) = swap_model();
        let pi = EtePolicy::new(model.rewards.clone(), 2, 2, 0.9, 25, 2, 1e-10).unwrap();
        let a = rollout(&model, &pi, &k, &[0.5, 0.5], 60, &mut stream_rng(11, 0)).0;
        let b = rollout(&model, &pi, &k, &[0.5, 0.5], 60, &mut stream_rng(11, 0)).0;
        assert_eq!(a, b);
    }

    #[test]
    fn counter_cap() {
        assert!(matches!(
            EtePolicy::with_cap(vec![0.0; 4], 2, 2, 0.9, 10, 100, 1e-9, 399),
            Err(LearnerError::TooLarge { count: 400, cap: 399 })
        ));
    }

    #[test]
    fn short_period_plays_uniform_after_fallback() {
        // equal rewards: the self-loop fallback ties every action
        let rows = vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]];
        let k = Kernel::from_rows(2, 2, &rows).unwrap();
        let model = RobustMdp::new(
            vec!["x".into(), "y".into()],
            vec!["a".into(), "b".into()],
            vec![0.3; 4],
            0.9,
            Ambiguity::Sa(rows.iter().map(|r| DistributionSet::singleton(r.clone())).collect()),
            ControllerSet::simplex(),
        )
        .unwrap();
        let pi = EtePolicy::new(model.rewards.clone(), 2, 2, 0.9, 1, 5, 1e-10).unwrap();
        let (_, mem) = rollout(&model, &pi, &k, &[1.0, 0.0], 2, &mut stream_rng(0, 0));
        let EteMemory::Exploit(rules) = mem else { panic!() };
        assert_eq!(*rules.0, vec![vec![0.5, 0.5]; 2]);
    }
}
