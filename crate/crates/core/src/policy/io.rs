//! JSON policy files, with states and actions referenced by name.

use super::{FiniteMemoryPolicy, PolicyError};
use crate::model::{RobustMdp, Row};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// An action distribution, or a single action name for a point mass.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum RowDoc {
    Action(String),
    Probs(Vec<f64>),
}

type RuleDoc = BTreeMap<String, RowDoc>;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UpdateDoc {
    memory: String,
    #[serde(default = "any")]
    state: String,
    #[serde(default = "any")]
    action: String,
    #[serde(default = "any")]
    next: String,
    to: String,
}

fn any() -> String {
    "*".into()
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum PolicyDoc {
    Stationary {
        rule: RuleDoc,
    },
    MarkovSchedule {
        rules: Vec<RuleDoc>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tail: Option<RuleDoc>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cycle: Option<Vec<RuleDoc>>,
    },
    FiniteMemory {
        memory: Vec<String>,
        initial: String,
        decide: BTreeMap<String, RuleDoc>,
        #[serde(default)]
        update: Vec<UpdateDoc>,
    },
}

/// Reads a policy for `model`. Update entries not listed keep the memory;
/// `"*"` matches every state, action or next state, and later entries win.
pub fn parse_policy(text: &str, model: &RobustMdp) -> Result<FiniteMemoryPolicy, PolicyError> {
    let doc: PolicyDoc = serde_json::from_str(text)?;
    match doc {
        PolicyDoc::Stationary { rule } => FiniteMemoryPolicy::stationary(decode_rule(&rule, model)?),
        PolicyDoc::MarkovSchedule { rules, tail, cycle } => {
            let prefix = rules.iter().map(|r| decode_rule(r, model)).collect::<Result<Vec<_>, _>>()?;
            let cycle = match (tail, cycle) {
                (Some(t), None) => vec![decode_rule(&t, model)?],
                (None, Some(c)) => c.iter().map(|r| decode_rule(r, model)).collect::<Result<Vec<_>, _>>()?,
                _ => return Err(PolicyError::Invalid("markov_schedule needs exactly one of tail, cycle".into())),
            };
            FiniteMemoryPolicy::markov_schedule(prefix, cycle)
        }
        PolicyDoc::FiniteMemory { memory, initial, decide, update } => {
            let ns = model.n_states();
            let na = model.n_actions();
            let mem_index = |name: &str| {
                memory
                    .iter()
                    .position(|m| m == name)
                    .ok_or_else(|| PolicyError::Invalid(format!("unknown memory {name:?}")))
            };
            let init = mem_index(&initial)?;
            let mut rows = Vec::with_capacity(memory.len() * ns);
            for m in &memory {
                let rule = decide.get(m).ok_or_else(|| PolicyError::Invalid(format!("no decision rule for memory {m:?}")))?;
                rows.extend(decode_rule(rule, model)?);
            }
            if decide.len() != memory.len() {
                return Err(PolicyError::Invalid("decide lists an unknown memory".into()));
            }
            let mut table = Vec::with_capacity(memory.len() * ns * na * ns);
            for m in 0..memory.len() {
                table.extend(std::iter::repeat_n(m, ns * na * ns));
            }
            for u in &update {
                let m = mem_index(&u.memory)?;
                let to = mem_index(&u.to)?;
                let states = matching(&u.state, &model.states)?;
                let actions = matching(&u.action, &model.actions)?;
                let nexts = matching(&u.next, &model.states)?;
                for &s in &states {
                    for &a in &actions {
                        for &s2 in &nexts {
                            table[((m * ns + s) * na + a) * ns + s2] = to;
                        }
                    }
                }
            }
            FiniteMemoryPolicy::new(ns, na, memory.len(), init, rows, table)
        }
    }
}

fn matching(pattern: &str, names: &[String]) -> Result<Vec<usize>, PolicyError> {
    if pattern == "*" {
        return Ok((0..names.len()).collect());
    }
    names
        .iter()
        .position(|n| n == pattern)
        .map(|i| vec![i])
        .ok_or_else(|| PolicyError::Invalid(format!("unknown name {pattern:?}")))
}

fn decode_rule(rule: &RuleDoc, model: &RobustMdp) -> Result<Vec<Row>, PolicyError> {
    if rule.len() != model.n_states() {
        return Err(PolicyError::Invalid(format!("a rule needs one entry per state, found {}", rule.len())));
    }
    model
        .states
        .iter()
        .map(|s| {
            let row = rule.get(s).ok_or_else(|| PolicyError::Invalid(format!("rule misses state {s:?}")))?;
            match row {
                RowDoc::Probs(p) => Ok(p.clone()),
                RowDoc::Action(a) => {
                    let i = model.action_index(a).ok_or_else(|| PolicyError::Invalid(format!("unknown action {a:?}")))?;
                    Ok(crate::model::unit(model.n_actions(), i))
                }
            }
        })
        .collect()
}

fn encode_rule(policy: &FiniteMemoryPolicy, m: usize, model: &RobustMdp) -> RuleDoc {
    model
        .states
        .iter()
        .enumerate()
        .map(|(s, name)| {
            let row = policy.rule(m, s);
            let doc = match row.iter().position(|&x| x == 1.0) {
                Some(a) => RowDoc::Action(model.actions[a].clone()),
                None => RowDoc::Probs(row.to_vec()),
            };
            (name.clone(), doc)
        })
        .collect()
}

/// Writes a policy as `stationary` or `finite_memory`.
pub fn serialize_policy(policy: &FiniteMemoryPolicy, model: &RobustMdp) -> Result<String, PolicyError> {
    policy.check_dims(model)?;
    let doc = if policy.is_stationary() {
        PolicyDoc::Stationary { rule: encode_rule(policy, 0, model) }
    } else {
        let names: Vec<String> = (0..policy.n_memory()).map(|m| format!("m{m}")).collect();
        let mut update = Vec::new();
        for m in 0..policy.n_memory() {
            for s in 0..model.n_states() {
                for a in 0..model.n_actions() {
                    for s2 in 0..model.n_states() {
                        let to = policy.next_memory(m, s, a, s2);
                        if to != m {
                            update.push(UpdateDoc {
                                memory: names[m].clone(),
                                state: model.states[s].clone(),
                                action: model.actions[a].clone(),
                                next: model.states[s2].clone(),
                                to: names[to].clone(),
                            });
                        }
                    }
                }
            }
        }
        PolicyDoc::FiniteMemory {
            memory: names.clone(),
            initial: names[policy.initial()].clone(),
            decide: (0..policy.n_memory()).map(|m| (names[m].clone(), encode_rule(policy, m, model))).collect(),
            update,
        }
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}
