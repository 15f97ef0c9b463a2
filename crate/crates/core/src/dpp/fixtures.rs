//! The three counterexample instances, rescaled to rewards in `[0, 1]`.
//!
//! Original rewards `r` in `[-1, 1]` are stored as `(r + 1) / 2`; the attached
//! [`RewardMap`] turns computed values back into the original scale.

use super::DppError;
use crate::model::{Ambiguity, ControllerSet, DistributionSet, Matrix, RewardMap, RobustMdp, Row};
use crate::policy::{FiniteMemoryAdversary, FiniteMemoryPolicy};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FixtureId {
    #[serde(rename = "EX_5_1")]
    LearnThenCommit,
    #[serde(rename = "EX_5_2")]
    MarkovBeatsStationary,
    #[serde(rename = "EX_5_3_CONVEX")]
    DeterministicConvex,
    #[serde(rename = "EX_5_3_FINITE")]
    DeterministicFinite,
}

impl FixtureId {
    pub const ALL: [FixtureId; 4] = [
        FixtureId::LearnThenCommit,
        FixtureId::MarkovBeatsStationary,
        FixtureId::DeterministicConvex,
        FixtureId::DeterministicFinite,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FixtureId::LearnThenCommit => "EX_5_1",
            FixtureId::MarkovBeatsStationary => "EX_5_2",
            FixtureId::DeterministicConvex => "EX_5_3_CONVEX",
            FixtureId::DeterministicFinite => "EX_5_3_FINITE",
        }
    }
}

impl fmt::Display for FixtureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FixtureId {
    type Err = DppError;

    fn from_str(s: &str) -> Result<Self, DppError> {
        FixtureId::ALL
            .into_iter()
            .find(|id| id.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| DppError::UnknownFixture(s.to_string()))
    }
}

/// A named controller offered as evidence against the DPP.
#[derive(Clone, Debug, PartialEq)]
pub struct Witness {
    pub name: String,
    pub policy: FiniteMemoryPolicy,
}

#[derive(Clone, Debug)]
pub struct Fixture {
    pub id: FixtureId,
    pub model: RobustMdp,
    /// Initial distribution the closed forms refer to.
    pub initial: Vec<f64>,
    pub witnesses: Vec<Witness>,
    /// Closed-form values on the original reward scale.
    pub expected: BTreeMap<String, f64>,
}

/// The affine map from stored rewards back to `[-1, 1]`.
pub const UNIT_RESCALE: RewardMap = RewardMap { scale: 2.0, shift: -1.0 };

fn rescale(r: f64) -> f64 {
    (r + 1.0) / 2.0
}

fn names(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

fn unit(n: usize, i: usize) -> Row {
    crate::model::unit(n, i)
}

/// Same rule at every state.
fn everywhere(ns: usize, row: Row) -> Vec<Row> {
    vec![row; ns]
}

/// The two kernels at the decision state: under the first, `a1` leads to
/// the bad state and `a2` to the good one; the second swaps them.
fn coupled_pair(ns: usize, good: usize, bad: usize) -> (Matrix, Matrix) {
    (vec![unit(ns, bad), unit(ns, good)], vec![unit(ns, good), unit(ns, bad)])
}

pub fn fixture(id: FixtureId, gamma: f64) -> Result<Fixture, DppError> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(DppError::Invalid(format!("discount out of range (0, 1): {gamma}")));
    }
    match id {
        FixtureId::LearnThenCommit => learn_then_commit(gamma),
        FixtureId::MarkovBeatsStationary => markov_beats_stationary(gamma),
        FixtureId::DeterministicConvex => deterministic(gamma, true),
        FixtureId::DeterministicFinite => deterministic(gamma, false),
    }
}

/// States I, G, B; the adversary fixes one of two coupled kernels at I.
fn learn_then_commit(gamma: f64) -> Result<Fixture, DppError> {
    let ns = 3;
    let (i, g, b) = (0, 1, 2);
    let (p1, p2) = coupled_pair(ns, g, b);
    let back = vec![unit(ns, i); 2];
    let model = RobustMdp::new(
        names(&["I", "G", "B"]),
        names(&["a1", "a2"]),
        [0.0, 0.0, 1.0, 1.0, -1.0, -1.0].map(rescale).to_vec(),
        gamma,
        Ambiguity::S(vec![
            DistributionSet::finite(vec![p1, p2]),
            DistributionSet::singleton(back.clone()),
            DistributionSet::singleton(back),
        ]),
        ControllerSet::simplex(),
    )?
    .with_reward_map(UNIT_RESCALE);

    // memory 0: undecided, 1: repeat a1, 2: repeat a2
    let half = vec![0.5, 0.5];
    let mut decide = everywhere(ns, half);
    decide.extend(everywhere(ns, unit(2, 0)));
    decide.extend(everywhere(ns, unit(2, 1)));
    let mut update = Vec::new();
    for m in 0..3 {
        for s in 0..ns {
            for a in 0..2 {
                for s2 in 0..ns {
                    let to = if m == 0 && s == i && s2 == g {
                        1 + a
                    } else if m == 0 && s == i && s2 == b {
                        2 - a
                    } else {
                        m
                    };
                    update.push(to);
                }
            }
        }
    }
    let witness = FiniteMemoryPolicy::new(ns, 2, 3, 0, decide, update)?;

    let g2 = gamma * gamma;
    let expected = BTreeMap::from([
        ("u_star[I]".to_string(), 0.0),
        ("u_star[G]".to_string(), 1.0),
        ("u_star[B]".to_string(), -1.0),
        ("u_tilde[I]".to_string(), gamma / (1.0 - g2)),
        ("witness[learn_then_commit]".to_string(), gamma * g2 / (1.0 - g2)),
    ]);
    Ok(Fixture {
        id: FixtureId::LearnThenCommit,
        model,
        initial: unit(ns, i),
        witnesses: vec![Witness { name: "learn_then_commit".into(), policy: witness }],
        expected,
    })
}

/// States I, B, C with B and C absorbing; only defined for gamma = 0.8.
fn markov_beats_stationary(gamma: f64) -> Result<Fixture, DppError> {
    if gamma != 0.8 {
        return Err(DppError::Invalid("EX_5_2 is defined for gamma = 0.8 only".into()));
    }
    let ns = 3;
    let p1 = vec![vec![1.0, 0.0, 0.0], vec![0.5, 0.5, 0.0]];
    let p2 = vec![vec![0.0, 0.5, 0.5], vec![0.5, 0.0, 0.5]];
    let model = RobustMdp::new(
        names(&["I", "B", "C"]),
        names(&["a1", "a2"]),
        [0.0, 0.0, 0.6, 0.6, 0.0, 0.0].map(rescale).to_vec(),
        gamma,
        Ambiguity::S(vec![
            DistributionSet::finite(vec![p1, p2]),
            DistributionSet::singleton(vec![unit(ns, 1); 2]),
            DistributionSet::singleton(vec![unit(ns, 2); 2]),
        ]),
        ControllerSet::simplex(),
    )?
    .with_reward_map(UNIT_RESCALE);

    let rule = |row: Row| {
        let mut r = everywhere(ns, unit(2, 0));
        r[0] = row;
        r
    };
    let witness = FiniteMemoryPolicy::markov_schedule(
        vec![rule(unit(2, 0)), rule(unit(2, 1))],
        vec![rule(vec![0.75, 0.25])],
    )?;
    let expected = BTreeMap::from([
        ("u_star[I]".to_string(), 1.0),
        ("u_star[B]".to_string(), 3.0),
        ("u_star[C]".to_string(), 0.0),
        ("controller[I][a1]".to_string(), 0.75),
        // forward recursion of the schedule: 0.8 * (0.8 / 2) * (u(I) + u(B))
        ("witness[markov_schedule] vs p1".to_string(), 1.28),
        ("witness[markov_schedule] vs p2".to_string(), 1.2),
    ]);
    Ok(Fixture {
        id: FixtureId::MarkovBeatsStationary,
        model,
        initial: unit(ns, 0),
        witnesses: vec![Witness { name: "markov_schedule".into(), policy: witness }],
        expected,
    })
}

/// Mixing parameters at which the closed forms are tabulated.
pub const ALPHA_GRID: [f64; 4] = [0.0, 0.25, 0.5, 1.0];

/// States I0, I1, I2, I, G, B; a coin at I0 picks I1 or I2, both lead to I,
/// which behaves like the decision state of `EX_5_1`. Deterministic controller.
fn deterministic(gamma: f64, convex: bool) -> Result<Fixture, DppError> {
    let ns = 6;
    let (i0, i1, i2, i, g, b) = (0, 1, 2, 3, 4, 5);
    let (p1, p2) = coupled_pair(ns, g, b);
    let coin = vec![0.0, 0.5, 0.5, 0.0, 0.0, 0.0];
    let to_i = vec![unit(ns, i); 2];
    let mk = if convex { DistributionSet::hull } else { DistributionSet::finite };
    let mut rewards = vec![0.0; ns * 2];
    rewards[g * 2] = 1.0;
    rewards[g * 2 + 1] = 1.0;
    rewards[b * 2] = -1.0;
    rewards[b * 2 + 1] = -1.0;
    let model = RobustMdp::new(
        names(&["I0", "I1", "I2", "I", "G", "B"]),
        names(&["a1", "a2"]),
        rewards.into_iter().map(rescale).collect(),
        gamma,
        Ambiguity::S(vec![
            DistributionSet::singleton(vec![coin.clone(), coin]),
            DistributionSet::singleton(to_i.clone()),
            DistributionSet::singleton(to_i.clone()),
            mk(vec![p1, p2]),
            DistributionSet::singleton(to_i.clone()),
            DistributionSet::singleton(to_i),
        ]),
        ControllerSet::dirac(),
    )?
    .with_reward_map(UNIT_RESCALE);

    let a1 = everywhere(ns, unit(2, 0));
    let a2 = everywhere(ns, unit(2, 1));
    // the decision state is visited at even times 2, 4, 6, ...
    let alternating = FiniteMemoryPolicy::markov_schedule(
        vec![a1.clone(), a1.clone()],
        vec![a1.clone(), a1.clone(), a2.clone(), a1.clone()],
    )?;
    // memory 0: before the coin, 1: saw I1, 2: saw I2
    let mut decide = a1.clone();
    decide.extend(a1.clone());
    decide.extend(a2);
    let mut update = Vec::new();
    for m in 0..3 {
        for s in 0..ns {
            for _a in 0..2 {
                for s2 in 0..ns {
                    update.push(match (m, s, s2) {
                        (0, s, s2) if s == i0 && s2 == i1 => 1,
                        (0, s, s2) if s == i0 && s2 == i2 => 2,
                        _ => m,
                    });
                }
            }
        }
    }
    let branching = FiniteMemoryPolicy::new(ns, 2, 3, 0, decide, update)?;

    let g2 = gamma * gamma;
    let g3 = g2 * gamma;
    let mut expected = BTreeMap::from([
        ("u_star[I0]".to_string(), -g3 / (1.0 - g2)),
        ("witness[branching]".to_string(), 0.0),
        ("witness[alternating] robust".to_string(), -g3 / (1.0 + g2)),
    ]);
    for alpha in ALPHA_GRID {
        expected.insert(format!("witness[alternating] alpha={alpha}"), (1.0 - 2.0 * alpha) * g3 / (1.0 + g2));
    }
    Ok(Fixture {
        id: if convex { FixtureId::DeterministicConvex } else { FixtureId::DeterministicFinite },
        model,
        initial: unit(ns, i0),
        witnesses: vec![
            Witness { name: "alternating".into(), policy: alternating },
            Witness { name: "branching".into(), policy: branching },
        ],
        expected,
    })
}

/// Kernel of the six-state instance with the decision state using
/// `alpha * p1 + (1 - alpha) * p2`, one matrix per state.
pub fn mixed_kernel(model: &RobustMdp, alpha: f64) -> Vec<Matrix> {
    let ns = model.n_states();
    let decision = model.state_index("I").expect("fixture has a decision state");
    let (p1, p2) = match &model.ambiguity {
        Ambiguity::S(sets) => (sets[decision].vertices[0].clone(), sets[decision].vertices[1].clone()),
        _ => unreachable!("fixtures are S-rectangular"),
    };
    (0..ns)
        .map(|s| match &model.ambiguity {
            Ambiguity::S(_) if s == decision => p1
                .iter()
                .zip(&p2)
                .map(|(r1, r2)| r1.iter().zip(r2).map(|(x, y)| alpha * x + (1.0 - alpha) * y).collect())
                .collect(),
            Ambiguity::S(sets) => sets[s].vertices[0].clone(),
            _ => unreachable!(),
        })
        .collect()
}

/// Five time-varying adversaries for the six-state convex instance: the
/// mixing weight at the decision state follows the listed schedules.
pub fn markov_adversary_grid(model: &RobustMdp) -> Result<Vec<FiniteMemoryAdversary>, DppError> {
    let schedules: [&[f64]; 5] = [&[0.0], &[1.0], &[0.5], &[0.0, 1.0], &[0.25, 0.75, 1.0, 0.0]];
    schedules
        .iter()
        .map(|alphas| {
            let cycle = alphas.iter().map(|&a| mixed_kernel(model, a)).collect();
            FiniteMemoryAdversary::markov(model, Vec::new(), cycle).map_err(DppError::from)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_round_trip() {
        for id in FixtureId::ALL {
            assert_eq!(id.as_str().parse::<FixtureId>().unwrap(), id);
        }
        assert!("EX_9".parse::<FixtureId>().is_err());
    }

    #[test]
    fn fixtures_validate() {
        for id in FixtureId::ALL {
            let f = fixture(id, 0.8).unwrap();
            assert!(f.model.validate().is_empty(), "{id}");
            for w in &f.witnesses {
                w.policy.check_dims(&f.model).unwrap();
            }
        }
    }

    #[test]
    fn three_state_lemma_instance_needs_its_discount() {
        assert!(fixture(FixtureId::MarkovBeatsStationary, 0.9).is_err());
    }
}
