//! JSON model files.

use super::{
    Ambiguity, ControllerKind, ControllerSet, DistributionSet, Matrix, ModelError, Rectangularity,
    RewardMap, RobustMdp, Row, SetKind, CONSTRUCTION_TOL, PARSE_TOL,
};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use std::collections::{BTreeMap, HashSet};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    states: Vec<String>,
    actions: Vec<String>,
    gamma: f64,
    rewards: BTreeMap<String, f64>,
    controller_set: ControllerDoc,
    ambiguity: AmbiguityDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reward_map: Option<RewardMap>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ControllerDoc {
    kind: ControllerKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    vertices: Option<Vec<Row>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AmbiguityDoc {
    rectangularity: Rectangularity,
    kind: SetKind,
    /// Per-key overrides of `kind`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    kinds: BTreeMap<String, SetKind>,
    sets: Value,
}

/// Parses and validates a model document.
///
/// Rows may be off by up to `1e-9` from summing to one; such rows are
/// rescaled so the returned model passes [`RobustMdp::validate`].
pub fn parse_model(text: &str) -> Result<RobustMdp, ModelError> {
    let doc: ModelDoc = serde_json::from_str(text)?;
    check_names("states", &doc.states)?;
    check_names("actions", &doc.actions)?;
    let ns = doc.states.len();
    let na = doc.actions.len();

    if !(doc.gamma > 0.0 && doc.gamma < 1.0) {
        return Err(ModelError::Range {
            field: "gamma".into(),
            message: format!("discount out of range (0, 1): {}", doc.gamma),
        });
    }

    let mut rewards = Vec::with_capacity(ns * na);
    for s in &doc.states {
        for a in &doc.actions {
            let key = format!("{s}|{a}");
            let r = *doc
                .rewards
                .get(&key)
                .ok_or_else(|| ModelError::Schema(format!("rewards: missing key {key}")))?;
            if !(0.0..=1.0).contains(&r) {
                return Err(ModelError::Range {
                    field: format!("rewards[{key}]"),
                    message: if r < 0.0 { format!("reward below 0: {r}") } else { format!("reward outside [0, 1]: {r}") },
                });
            }
            rewards.push(r);
        }
    }
    if doc.rewards.len() != ns * na {
        return Err(ModelError::Schema(format!(
            "rewards: expected {} keys, found {}",
            ns * na,
            doc.rewards.len()
        )));
    }

    let controller = match doc.controller_set.kind {
        ControllerKind::FullSimplex => ControllerSet::simplex(),
        ControllerKind::Dirac => ControllerSet::dirac(),
        kind => {
            let mut vertices = doc
                .controller_set
                .vertices
                .ok_or_else(|| ModelError::Schema("controller_set: vertices required".into()))?;
            if vertices.is_empty() {
                return Err(ModelError::Schema("controller_set: vertices must be non-empty".into()));
            }
            for (i, v) in vertices.iter_mut().enumerate() {
                fix_row(v, na, &format!("controller_set.vertices[{i}]"))?;
            }
            ControllerSet { kind, vertices }
        }
    };

    let amb = &doc.ambiguity;
    let kind_of = |key: &str| amb.kinds.get(key).copied().unwrap_or(amb.kind);
    let ambiguity = match amb.rectangularity {
        Rectangularity::Sa => {
            let obj = as_object(&amb.sets, "ambiguity.sets")?;
            expect_keys(obj, ns * na, "ambiguity.sets")?;
            let mut sets = Vec::with_capacity(ns * na);
            for s in &doc.states {
                for a in &doc.actions {
                    let key = format!("{s}|{a}");
                    let v = obj
                        .get(&key)
                        .ok_or_else(|| ModelError::Schema(format!("ambiguity.sets: missing key {key}")))?;
                    let mut rows: Vec<Row> = decode(v, &key)?;
                    non_empty(&rows, &key)?;
                    for (k, r) in rows.iter_mut().enumerate() {
                        fix_row(r, ns, &format!("ambiguity.sets[{key}][{k}]"))?;
                    }
                    sets.push(DistributionSet { kind: kind_of(&key), vertices: rows });
                }
            }
            Ambiguity::Sa(sets)
        }
        Rectangularity::S => {
            let obj = as_object(&amb.sets, "ambiguity.sets")?;
            expect_keys(obj, ns, "ambiguity.sets")?;
            let mut sets = Vec::with_capacity(ns);
            for s in &doc.states {
                let v = obj
                    .get(s)
                    .ok_or_else(|| ModelError::Schema(format!("ambiguity.sets: missing key {s}")))?;
                let mut mats: Vec<Matrix> = decode(v, s)?;
                non_empty(&mats, s)?;
                for (k, m) in mats.iter_mut().enumerate() {
                    fix_matrix(m, na, ns, &format!("ambiguity.sets[{s}][{k}]"))?;
                }
                sets.push(DistributionSet { kind: kind_of(s), vertices: mats });
            }
            Ambiguity::S(sets)
        }
        Rectangularity::General => {
            let kernels: Vec<Map<String, Value>> = decode(&amb.sets, "ambiguity.sets")?;
            non_empty(&kernels, "ambiguity.sets")?;
            let mut out = Vec::with_capacity(kernels.len());
            for (k, obj) in kernels.iter().enumerate() {
                expect_keys(obj, ns * na, &format!("ambiguity.sets[{k}]"))?;
                let mut rows = Vec::with_capacity(ns * na);
                for s in &doc.states {
                    for a in &doc.actions {
                        let key = format!("{s}|{a}");
                        let v = obj.get(&key).ok_or_else(|| {
                            ModelError::Schema(format!("ambiguity.sets[{k}]: missing key {key}"))
                        })?;
                        let mut row: Row = decode(v, &key)?;
                        fix_row(&mut row, ns, &format!("ambiguity.sets[{k}][{key}]"))?;
                        rows.push(row);
                    }
                }
                out.push(rows);
            }
            Ambiguity::General(DistributionSet { kind: amb.kind, vertices: out })
        }
    };

    let mut model = RobustMdp::new(doc.states, doc.actions, rewards, doc.gamma, ambiguity, controller)?;
    if let Some(map) = doc.reward_map {
        if !(map.scale.is_finite() && map.shift.is_finite()) || map.scale == 0.0 {
            return Err(ModelError::Range {
                field: "reward_map".into(),
                message: "scale must be finite and nonzero, shift finite".into(),
            });
        }
        model.reward_map = Some(map);
    }
    Ok(model)
}

/// Writes a model in the format read by [`parse_model`]. Numbers use the
/// shortest decimal form that reads back to the same `f64`.
pub fn serialize_model(model: &RobustMdp) -> String {
    let na = model.n_actions();
    let mut rewards = BTreeMap::new();
    for (i, &r) in model.rewards.iter().enumerate() {
        rewards.insert(format!("{}|{}", model.states[i / na], model.actions[i % na]), r);
    }
    let controller_set = ControllerDoc {
        kind: model.controller.kind,
        vertices: match model.controller.kind {
            ControllerKind::FullSimplex | ControllerKind::Dirac => None,
            _ => Some(model.controller.vertices.clone()),
        },
    };
    let (kinds, sets): (Vec<(String, SetKind)>, Value) = match &model.ambiguity {
        Ambiguity::Sa(sets) => {
            let mut obj = Map::new();
            let mut kinds = Vec::new();
            for (i, p) in sets.iter().enumerate() {
                let key = format!("{}|{}", model.states[i / na], model.actions[i % na]);
                obj.insert(key.clone(), serde_json::to_value(&p.vertices).expect("rows serialize"));
                kinds.push((key, p.kind));
            }
            (kinds, Value::Object(obj))
        }
        Ambiguity::S(sets) => {
            let mut obj = Map::new();
            let mut kinds = Vec::new();
            for (s, p) in sets.iter().enumerate() {
                let key = model.states[s].clone();
                obj.insert(key.clone(), serde_json::to_value(&p.vertices).expect("matrices serialize"));
                kinds.push((key, p.kind));
            }
            (kinds, Value::Object(obj))
        }
        Ambiguity::General(p) => {
            let kernels: Vec<Value> = p
                .vertices
                .iter()
                .map(|rows| {
                    let mut obj = Map::new();
                    for (i, row) in rows.iter().enumerate() {
                        let key = format!("{}|{}", model.states[i / na], model.actions[i % na]);
                        obj.insert(key, serde_json::to_value(row).expect("row serializes"));
                    }
                    Value::Object(obj)
                })
                .collect();
            (vec![("*".into(), p.kind)], Value::Array(kernels))
        }
    };
    // the most common kind is the default, the rest become overrides
    let finite = kinds.iter().filter(|(_, k)| *k == SetKind::Finite).count();
    let default = if finite * 2 >= kinds.len() { SetKind::Finite } else { SetKind::ConvexHull };
    let overrides = kinds
        .into_iter()
        .filter(|(key, k)| *k != default && key != "*")
        .collect::<BTreeMap<_, _>>();
    let kind = match &model.ambiguity {
        Ambiguity::General(p) => p.kind,
        _ => default,
    };
    let doc = ModelDoc {
        states: model.states.clone(),
        actions: model.actions.clone(),
        gamma: model.gamma,
        rewards,
        controller_set,
        ambiguity: AmbiguityDoc {
            rectangularity: model.ambiguity.rectangularity(),
            kind,
            kinds: overrides,
            sets,
        },
        reward_map: model.reward_map,
    };
    serde_json::to_string_pretty(&doc).expect("model serializes")
}

fn check_names(field: &str, names: &[String]) -> Result<(), ModelError> {
    if names.is_empty() {
        return Err(ModelError::Schema(format!("{field}: at least one entry required")));
    }
    let mut seen = HashSet::new();
    for n in names {
        if n.contains('|') {
            return Err(ModelError::Schema(format!("{field}: name {n:?} contains '|'")));
        }
        if !seen.insert(n) {
            return Err(ModelError::Schema(format!("{field}: duplicate name {n:?}")));
        }
    }
    Ok(())
}

fn as_object<'a>(v: &'a Value, field: &str) -> Result<&'a Map<String, Value>, ModelError> {
    v.as_object().ok_or_else(|| ModelError::Schema(format!("{field}: expected an object")))
}

fn expect_keys(obj: &Map<String, Value>, n: usize, field: &str) -> Result<(), ModelError> {
    if obj.len() != n {
        return Err(ModelError::Schema(format!("{field}: expected {n} keys, found {}", obj.len())));
    }
    Ok(())
}

fn decode<T: serde::de::DeserializeOwned>(v: &Value, field: &str) -> Result<T, ModelError> {
    T::deserialize(v).map_err(|e| ModelError::Schema(format!("{field}: {e}")))
}

fn non_empty<T>(xs: &[T], field: &str) -> Result<(), ModelError> {
    if xs.is_empty() {
        return Err(ModelError::Schema(format!("{field}: set must be non-empty")));
    }
    Ok(())
}

fn fix_matrix(m: &mut Matrix, rows: usize, width: usize, field: &str) -> Result<(), ModelError> {
    if m.len() != rows {
        return Err(ModelError::Schema(format!("{field}: expected {rows} rows, found {}", m.len())));
    }
    for (i, r) in m.iter_mut().enumerate() {
        fix_row(r, width, &format!("{field}[{i}]"))?;
    }
    Ok(())
}

/// Checks a row at parse tolerance and rescales it into construction tolerance.
fn fix_row(row: &mut Row, width: usize, field: &str) -> Result<(), ModelError> {
    if row.len() != width {
        return Err(ModelError::Schema(format!("{field}: expected {width} entries, found {}", row.len())));
    }
    if let Some(x) = row.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(ModelError::Range { field: field.into(), message: format!("probability entry {x}") });
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > PARSE_TOL {
        return Err(ModelError::Stochasticity { field: field.into(), sum });
    }
    if (sum - 1.0).abs() > CONSTRUCTION_TOL {
        row.iter_mut().for_each(|x| *x /= sum);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOC: &str = r#"{
        "states": ["I", "G", "B"],
        "actions": ["a1", "a2"],
        "gamma": 0.9,
        "rewards": {"I|a1": 0.5, "I|a2": 0.5, "G|a1": 1, "G|a2": 1, "B|a1": 0, "B|a2": 0},
        "controller_set": {"kind": "simplex"},
        "ambiguity": {
            "rectangularity": "s",
            "kind": "finite",
            "sets": {
                "I": [[[0,0,1],[0,1,0]], [[0,1,0],[0,0,1]]],
                "G": [[[1,0,0],[1,0,0]]],
                "B": [[[1,0,0],[1,0,0]]]
            }
        }
    }"#;

    #[test]
    fn parses_three_state_counterexample() {
        let m = parse_model(DOC).unwrap();
        assert_eq!(m.n_states(), 3);
        assert_eq!(m.n_actions(), 2);
        assert_eq!(m.gamma, 0.9);
        match &m.ambiguity {
            Ambiguity::S(sets) => {
                assert_eq!(sets[0].len(), 2);
                assert_eq!(sets[0].kind, SetKind::Finite);
            }
            _ => panic!("expected S-rectangular"),
        }
    }

    #[test]
    fn row_sum_off_by_a_tenth_is_rejected() {
        let bad = DOC.replace("\"G\": [[[1,0,0],[1,0,0]]]", "\"G\": [[[0.9,0,0],[1,0,0]]]");
        match parse_model(&bad) {
            Err(ModelError::Stochasticity { field, sum }) => {
                assert!(field.contains("G"));
                assert!((sum - 0.9).abs() < 1e-15);
            }
            other => panic!("expected stochasticity error, got {other:?}"),
        }
    }

    #[test]
    fn small_row_error_is_rescaled() {
        let text = DOC.replace("\"G\": [[[1,0,0],[1,0,0]]]", "\"G\": [[[0.5,0.5000000001,0],[1,0,0]]]");
        let m = parse_model(&text).unwrap();
        assert!(m.validate().is_empty());
    }

    #[test]
    fn missing_field_is_schema_error() {
        let text = DOC.replace("\"gamma\": 0.9,", "");
        assert!(matches!(parse_model(&text), Err(ModelError::Json(_))));
        let text = DOC.replace("\"I|a2\": 0.5,", "");
        assert!(matches!(parse_model(&text), Err(ModelError::Schema(_))));
    }

    #[test]
    fn wrong_arity_is_schema_error() {
        let text = DOC.replace("\"B\": [[[1,0,0],[1,0,0]]]", "\"B\": [[[1,0],[1,0,0]]]");
        assert!(matches!(parse_model(&text), Err(ModelError::Schema(_))));
    }

    #[test]
    fn range_errors() {
        let text = DOC.replace("\"gamma\": 0.9", "\"gamma\": 1.0");
        assert!(matches!(parse_model(&text), Err(ModelError::Range { .. })));
        let text = DOC.replace("\"B|a1\": 0", "\"B|a1\": -0.1");
        match parse_model(&text) {
            Err(ModelError::Range { message, .. }) => assert!(message.contains("reward below 0")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn round_trip_is_identity() {
        let m = parse_model(DOC).unwrap();
        let again = parse_model(&serialize_model(&m)).unwrap();
        assert_eq!(m, again);
    }

    #[test]
    fn general_round_trip() {
        let m = RobustMdp::new(
            vec!["x".into(), "y".into()],
            vec!["a".into()],
            vec![0.25, 0.75],
            0.5,
            Ambiguity::General(DistributionSet::hull(vec![
                vec![vec![0.1, 0.9], vec![0.3, 0.7]],
                vec![vec![1.0 / 3.0, 2.0 / 3.0], vec![0.5, 0.5]],
            ])),
            ControllerSet::dirac(),
        )
        .unwrap()
        .with_reward_map(RewardMap { scale: 2.0, shift: -1.0 });
        let again = parse_model(&serialize_model(&m)).unwrap();
        assert_eq!(m, again);
    }

    #[test]
    fn mixed_kinds_round_trip() {
        let m = RobustMdp::new(
            vec!["x".into(), "y".into()],
            vec!["a".into()],
            vec![0.0, 1.0],
            0.5,
            Ambiguity::Sa(vec![
                DistributionSet::hull(vec![vec![0.1, 0.9], vec![1.0, 0.0]]),
                DistributionSet::finite(vec![vec![0.5, 0.5]]),
            ]),
            ControllerSet::finite(vec![vec![1.0]]),
        )
        .unwrap();
        let text = serialize_model(&m);
        assert!(text.contains("kinds"));
        assert_eq!(parse_model(&text).unwrap(), m);
    }
}
