use crate::model::{unit, Ambiguity, ControllerSet, DistributionSet, RobustMdp};

/// Four states on a ring; `stay` keeps the state and `move` advances it.
/// Only `s2` pays. At `s1` the adversary either moves reliably or lets
/// `move` slip back in place with probability 0.2. Every kernel is communicating.
pub fn communicating_fixture(gamma: f64) -> RobustMdp {
    let ns = 4;
    let rule = |s: usize| vec![unit(ns, s), unit(ns, (s + 1) % ns)];
    let mut slip = rule(1);
    slip[1] = vec![0.0, 0.2, 0.8, 0.0];
    let sets = (0..ns)
        .map(|s| if s == 1 { DistributionSet::finite(vec![rule(1), slip.clone()]) } else { DistributionSet::singleton(rule(s)) })
        .collect();
    let mut rewards = vec![0.0; ns * 2];
    rewards[4] = 1.0;
    rewards[5] = 1.0;
    RobustMdp::new(
        (0..ns).map(|s| format!("s{s}")).collect(),
        vec!["stay".into(), "move".into()],
        rewards,
        gamma,
        Ambiguity::S(sets),
        ControllerSet::simplex(),
    )
    .expect("fixture is valid")
}
