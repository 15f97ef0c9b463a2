//! The default search family of gap witnesses.

use super::{certify_gap_with, DppError, GapCertificate, Witness};
use crate::model::{unit, Ambiguity, MixedRadix, RobustMdp, Row};
use crate::policy::{robust_evaluate_with, FiniteMemoryPolicy, RobustOptions};
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WitnessFamilyOptions {
    /// Longest repeating block of a deterministic Markov schedule.
    pub max_period: usize,
    /// Longest one-off prefix before the block.
    pub max_prefix: usize,
    /// Grid step `1 / grid` for randomized rules.
    pub grid: usize,
    /// Family members kept, shortest descriptions first.
    pub max_witnesses: usize,
    /// Members re-certified at full precision after the coarse ranking.
    pub recertify: usize,
}

impl Default for WitnessFamilyOptions {
    fn default() -> Self {
        WitnessFamilyOptions { max_period: 4, max_prefix: 2, grid: 4, max_witnesses: 4000, recertify: 4 }
    }
}

/// States where the choice of action can matter.
pub fn decision_states(model: &RobustMdp) -> Vec<usize> {
    let na = model.n_actions();
    (0..model.n_states())
        .filter(|&s| {
            (1..na).any(|a| {
                model.reward(s, a) != model.reward(s, 0)
                    || match &model.ambiguity {
                        Ambiguity::Sa(sets) => sets[s * na + a] != sets[s * na],
                        Ambiguity::S(sets) => sets[s].vertices.iter().any(|m| m[a] != m[0]),
                        Ambiguity::General(set) => set.vertices.iter().any(|k| k[s * na + a] != k[s * na]),
                    }
            })
        })
        .collect()
}

/// Points of the probability simplex with coordinates in multiples of `1 / grid`.
fn simplex_grid(n: usize, grid: usize) -> Vec<Row> {
    let mut out = Vec::new();
    let mut cur = vec![0usize; n];
    fn rec(i: usize, left: usize, cur: &mut Vec<usize>, grid: usize, out: &mut Vec<Row>) {
        let n = cur.len();
        if i + 1 == n {
            cur[i] = left;
            out.push(cur.iter().map(|&c| c as f64 / grid as f64).collect());
            return;
        }
        for c in (0..=left).rev() {
            cur[i] = c;
            rec(i + 1, left - c, cur, grid, out);
        }
    }
    if n > 0 {
        rec(0, grid, &mut cur, grid, &mut out);
    }
    out
}

/// Full rule from choices at the decision states; other states play the first action.
fn rule_from(ns: usize, na: usize, decision: &[usize], choices: &[Row]) -> Vec<Row> {
    let mut rule = vec![unit(na, 0); ns];
    for (&s, row) in decision.iter().zip(choices) {
        rule[s] = row.clone();
    }
    rule
}

fn label_actions(choice: &[usize]) -> String {
    choice.iter().map(|a| format!("a{}", a + 1)).collect::<Vec<_>>().join("")
}

/// Stationary grid rules, deterministic Markov schedules and learn-then-commit
/// automata, all inside the model's controller set.
pub fn default_witness_family(model: &RobustMdp, opts: WitnessFamilyOptions) -> Result<Vec<Witness>, DppError> {
    let (ns, na) = (model.n_states(), model.n_actions());
    let decision = decision_states(model);
    let mut out: Vec<Witness> = Vec::new();
    let full = |out: &Vec<Witness>| out.len() >= opts.max_witnesses;
    if decision.is_empty() || na < 2 {
        out.push(Witness { name: "stationary a1".into(), policy: FiniteMemoryPolicy::deterministic(&vec![0; ns], na)? });
        return Ok(out);
    }

    // pure choices are the vertices of the controller set; mixtures only when it mixes
    let pure = model.controller.canonical_vertices(na);
    let det_rules: Vec<Vec<usize>> = MixedRadix::new(vec![pure.len(); decision.len()]).collect();
    let det_row = |c: &[usize]| rule_from(ns, na, &decision, &c.iter().map(|&k| pure[k].clone()).collect::<Vec<_>>());
    let grid_rows: Vec<Row> = if model.controller.mixes() {
        simplex_grid(pure.len(), opts.grid.max(1))
            .into_iter()
            .map(|w| (0..na).map(|a| w.iter().zip(&pure).map(|(x, v)| x * v[a]).sum()).collect())
            .collect()
    } else {
        pure.clone()
    };
    for choice in MixedRadix::new(vec![grid_rows.len(); decision.len()]) {
        if full(&out) {
            return Ok(out);
        }
        let rows: Vec<Row> = choice.iter().map(|&g| grid_rows[g].clone()).collect();
        let name = format!(
            "stationary {}",
            rows.iter().map(|r| format!("{r:?}")).collect::<Vec<_>>().join(" ")
        );
        out.push(Witness { name, policy: FiniteMemoryPolicy::stationary(rule_from(ns, na, &decision, &rows))? });
    }

    for period in 1..=opts.max_period {
        for prefix in 0..=opts.max_prefix {
            let len = prefix + period;
            for seq in MixedRadix::new(vec![det_rules.len(); len]) {
                if full(&out) {
                    return Ok(out);
                }
                let rules: Vec<Vec<Row>> = seq.iter().map(|&k| det_row(&det_rules[k])).collect();
                let (pre, cyc) = rules.split_at(prefix);
                let name = format!(
                    "markov [{}] ({})*",
                    seq[..prefix].iter().map(|&k| label_actions(&det_rules[k])).collect::<Vec<_>>().join(" "),
                    seq[prefix..].iter().map(|&k| label_actions(&det_rules[k])).collect::<Vec<_>>().join(" ")
                );
                out.push(Witness { name, policy: FiniteMemoryPolicy::markov_schedule(pre.to_vec(), cyc.to_vec())? });
            }
        }
    }

    // memory 0 explores; memory 1 + k repeats action k. Leaving a decision state
    // for s' either stays (0), keeps the played action (1) or switches to the next one (2).
    if !model.controller.contains_dirac(na) {
        return Ok(out);
    }
    for explore in MixedRadix::new(vec![grid_rows.len(); decision.len()]) {
        let rows: Vec<Row> = explore.iter().map(|&g| grid_rows[g].clone()).collect();
        if rows.iter().all(|r| r.iter().any(|&p| p == 1.0)) {
            continue;
        }
        for reaction in MixedRadix::new(vec![3; ns]) {
            if reaction.iter().all(|&r| r == 0) {
                continue;
            }
            if full(&out) {
                return Ok(out);
            }
            let n_memory = na + 1;
            let mut decide = rule_from(ns, na, &decision, &rows);
            for a in 0..na {
                decide.extend(vec![unit(na, a); ns]);
            }
            let mut update = Vec::with_capacity(n_memory * ns * na * ns);
            for m in 0..n_memory {
                for s in 0..ns {
                    for a in 0..na {
                        for s2 in 0..ns {
                            let to = if m == 0 && decision.contains(&s) {
                                match reaction[s2] {
                                    0 => 0,
                                    1 => 1 + a,
                                    _ => 1 + (a + 1) % na,
                                }
                            } else {
                                m
                            };
                            update.push(to);
                        }
                    }
                }
            }
            let name = format!(
                "commit explore {} react {}",
                rows.iter().map(|r| format!("{r:?}")).collect::<Vec<_>>().join(" "),
                reaction.iter().map(|r| ["stay", "keep", "switch"][*r]).collect::<Vec<_>>().join(",")
            );
            out.push(Witness { name, policy: FiniteMemoryPolicy::new(ns, na, n_memory, 0, decide, update)? });
        }
    }
    Ok(out)
}

/// Ranks the family with coarse robust evaluations, then certifies the leaders.
pub fn search_gap(
    model: &RobustMdp,
    family: &[Witness],
    mu: &[f64],
    opts: RobustOptions,
    recertify: usize,
) -> Result<GapCertificate, DppError> {
    if family.is_empty() {
        return Err(DppError::Invalid("no witnesses given".into()));
    }
    let coarse = RobustOptions { tol: opts.tol.max(1e-4), grid_cap: opts.grid_cap.min(64), ..opts };
    let scores: Vec<f64> = family
        .par_iter()
        .map(|w| robust_evaluate_with(model, &w.policy, mu, coarse).map(|r| r.value))
        .collect::<Result<_, _>>()?;
    let mut order: Vec<usize> = (0..family.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let leaders: Vec<Witness> = order.iter().take(recertify.max(1)).map(|&i| family[i].clone()).collect();
    certify_gap_with(model, &leaders, mu, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dpp::{fixture, FixtureId};

    #[test]
    fn grid_sizes() {
        assert_eq!(simplex_grid(2, 4).len(), 5);
        assert_eq!(simplex_grid(3, 4).len(), 15);
        assert!(simplex_grid(3, 4).iter().all(|r| (r.iter().sum::<f64>() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn only_the_branching_state_decides() {
        let f = fixture(FixtureId::LearnThenCommit, 0.8).unwrap();
        assert_eq!(decision_states(&f.model), vec![0]);
    }

    #[test]
    fn family_contains_the_learn_then_commit_rule() {
        let f = fixture(FixtureId::LearnThenCommit, 0.8).unwrap();
        let fam = default_witness_family(&f.model, WitnessFamilyOptions::default()).unwrap();
        assert!(fam.iter().any(|w| w.name == "commit explore [0.5, 0.5] react stay,keep,switch"));
    }
}
