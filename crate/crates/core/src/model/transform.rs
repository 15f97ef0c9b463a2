//! Conversions between ambiguity layouts.

use super::{Ambiguity, Dims, DistributionSet, Matrix, MixedRadix, ModelError, Rectangularity, Row, SetKind, CONSTRUCTION_TOL};
use std::collections::HashSet;

pub const DEFAULT_PRODUCT_CAP: usize = 1_000_000;

/// A prior over kernels as `(weight, kernel)` pairs.
pub type Prior<T> = Vec<(f64, T)>;

/// Distributionally robust ambiguity: each set lists priors rather than kernels.
#[derive(Clone, Debug, PartialEq)]
pub enum PriorSpec {
    /// Priors over rows, per state-action pair (`s * |A| + a`).
    Sa(Vec<Vec<Prior<Row>>>),
    /// Priors over `|A| x |S|` matrices, per state.
    S(Vec<Vec<Prior<Matrix>>>),
}

/// Builds `P_s` as the Cartesian product of the rows `P_{s,a}`.
pub fn sa_to_s(amb: &Ambiguity, dims: Dims, cap: usize) -> Result<Ambiguity, ModelError> {
    let sets = match amb {
        Ambiguity::Sa(sets) => sets,
        _ => return Err(ModelError::Unsupported("sa_to_s needs an SA-rectangular set".into())),
    };
    if sets.len() != dims.states * dims.actions {
        return Err(ModelError::Schema("SA set count does not match dimensions".into()));
    }
    let mut out = Vec::with_capacity(dims.states);
    for s in 0..dims.states {
        let per_action = &sets[s * dims.actions..(s + 1) * dims.actions];
        if per_action.iter().any(|p| p.kind == SetKind::ConvexHull && p.len() > 1) {
            return Err(ModelError::Unsupported(
                "product of convex hulls is not the hull of row-wise products".into(),
            ));
        }
        let sizes: Vec<usize> = per_action.iter().map(|p| p.len()).collect();
        let count = sizes.iter().fold(1u128, |acc, &k| acc.saturating_mul(k as u128));
        if count > cap as u128 {
            return Err(ModelError::Blowup { state: s.to_string(), count, cap });
        }
        let vertices = MixedRadix::new(sizes)
            .map(|choice| choice.iter().enumerate().map(|(a, &k)| per_action[a].vertices[k].clone()).collect())
            .collect();
        out.push(DistributionSet::finite(vertices));
    }
    Ok(Ambiguity::S(out))
}

/// Projects a general set onto per-state or per-state-action sets.
pub fn marginalize(amb: &Ambiguity, dims: Dims, target: Rectangularity) -> Result<Ambiguity, ModelError> {
    let set = match amb {
        Ambiguity::General(p) => p,
        _ => return Err(ModelError::Unsupported("marginalize needs a general set".into())),
    };
    let rows = dims.states * dims.actions;
    if set.vertices.iter().any(|k| k.len() != rows || k.iter().any(|r| r.len() != dims.states)) {
        return Err(ModelError::Schema("kernel dimensions do not match".into()));
    }
    match target {
        Rectangularity::S => {
            let out = (0..dims.states)
                .map(|s| {
                    let mats: Vec<Matrix> = set
                        .vertices
                        .iter()
                        .map(|k| k[s * dims.actions..(s + 1) * dims.actions].to_vec())
                        .collect();
                    DistributionSet { kind: set.kind, vertices: dedup(mats, |m| m.concat()) }
                })
                .collect();
            Ok(Ambiguity::S(out))
        }
        Rectangularity::Sa => {
            let out = (0..rows)
                .map(|i| {
                    let rs: Vec<Row> = set.vertices.iter().map(|k| k[i].clone()).collect();
                    DistributionSet { kind: set.kind, vertices: dedup(rs, |r| r.clone()) }
                })
                .collect();
            Ok(Ambiguity::Sa(out))
        }
        Rectangularity::General => Ok(amb.clone()),
    }
}

/// Replaces every prior by its mean kernel.
pub fn reduce_drmdp(prior: &PriorSpec) -> Result<Ambiguity, ModelError> {
    match prior {
        PriorSpec::Sa(sets) => {
            let mut out = Vec::with_capacity(sets.len());
            for (i, priors) in sets.iter().enumerate() {
                let mut means = Vec::with_capacity(priors.len());
                for (j, p) in priors.iter().enumerate() {
                    check_weights(p, &format!("sets[{i}][{j}]"))?;
                    means.push(mean_row(p.iter().map(|(w, r)| (*w, r.as_slice()))));
                }
                out.push(DistributionSet::finite(means));
            }
            Ok(Ambiguity::Sa(out))
        }
        PriorSpec::S(sets) => {
            let mut out = Vec::with_capacity(sets.len());
            for (s, priors) in sets.iter().enumerate() {
                let mut means = Vec::with_capacity(priors.len());
                for (j, p) in priors.iter().enumerate() {
                    check_weights(p, &format!("sets[{s}][{j}]"))?;
                    let n_rows = p.first().map_or(0, |(_, m)| m.len());
                    let mean: Matrix = (0..n_rows)
                        .map(|a| mean_row(p.iter().map(|(w, m)| (*w, m[a].as_slice()))))
                        .collect();
                    means.push(mean);
                }
                out.push(DistributionSet::finite(means));
            }
            Ok(Ambiguity::S(out))
        }
    }
}

fn check_weights<T>(p: &Prior<T>, field: &str) -> Result<(), ModelError> {
    let sum: f64 = p.iter().map(|(w, _)| *w).sum();
    if p.is_empty() || p.iter().any(|(w, _)| !(*w >= 0.0)) || (sum - 1.0).abs() > CONSTRUCTION_TOL {
        return Err(ModelError::WeightSum { field: field.into(), sum });
    }
    Ok(())
}

fn mean_row<'a>(parts: impl Iterator<Item = (f64, &'a [f64])>) -> Row {
    let mut acc: Row = Vec::new();
    for (w, r) in parts {
        if acc.is_empty() {
            acc = vec![0.0; r.len()];
        }
        for (x, y) in acc.iter_mut().zip(r) {
            *x += w * y;
        }
    }
    acc
}

/// Keeps the first occurrence of each element, comparing entries rounded to 1e-12.
fn dedup<T>(xs: Vec<T>, flat: impl Fn(&T) -> Vec<f64>) -> Vec<T> {
    let mut seen = HashSet::new();
    xs.into_iter()
        .filter(|x| {
            let key: Vec<i64> = flat(x).iter().map(|v| (v * 1e12).round() as i64).collect();
            seen.insert(key)
        })
        .collect()
}
