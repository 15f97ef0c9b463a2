//! Per-state sup-inf and inf-sup optimizations.

use super::{lp::lp_maxmin, BellmanError};
use crate::model::{Ambiguity, Matrix, RobustMdp, Row, SetKind};
use serde::{Deserialize, Serialize};

/// Which element of the ambiguity set attains the inner optimum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdversaryArg {
    /// Index into the vertices of `P_s`.
    Vertex(usize),
    /// Convex weights over the vertices of `P_s`.
    Mixture(Vec<f64>),
    /// One vertex index of `P_{s,a}` per action.
    PerAction(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSolution {
    pub value: f64,
    /// Maximizing action distribution.
    pub controller: Row,
    pub adversary: AdversaryArg,
}

/// `r(s,a) + gamma * m[a].u` for every action.
fn action_values(model: &RobustMdp, s: usize, m: &Matrix, u: &[f64]) -> Row {
    m.iter()
        .enumerate()
        .map(|(a, row)| model.reward(s, a) + model.gamma * dot(row, u))
        .collect()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Per action, the least continuation over `P_{s,a}` and the vertex attaining it.
fn sa_minima(model: &RobustMdp, s: usize, u: &[f64]) -> Result<(Row, Vec<usize>), BellmanError> {
    let sets = match &model.ambiguity {
        Ambiguity::Sa(sets) => sets,
        _ => unreachable!("caller checked rectangularity"),
    };
    let na = model.n_actions();
    let mut values = Vec::with_capacity(na);
    let mut args = Vec::with_capacity(na);
    for a in 0..na {
        let set = &sets[s * na + a];
        let (k, best) = argmin(set.vertices.iter().map(|row| dot(row, u)))
            .ok_or_else(|| BellmanError::EmptySet(format!("state-action ({s}, {a})")))?;
        values.push(model.reward(s, a) + model.gamma * best);
        args.push(k);
    }
    Ok((values, args))
}

/// First index attaining the minimum.
pub(crate) fn argmin(xs: impl Iterator<Item = f64>) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, x) in xs.enumerate() {
        if best.is_none_or(|(_, b)| x < b) {
            best = Some((i, x));
        }
    }
    best
}

/// First index attaining the maximum.
pub(crate) fn argmax(xs: impl Iterator<Item = f64>) -> Option<(usize, f64)> {
    argmin(xs.map(|x| -x)).map(|(i, x)| (i, -x))
}

fn mix(weights: &[f64], vertices: &[Row]) -> Row {
    let mut out = vec![0.0; vertices[0].len()];
    for (w, v) in weights.iter().zip(vertices) {
        for (o, x) in out.iter_mut().zip(v) {
            *o += w * x;
        }
    }
    out
}

fn state_set(model: &RobustMdp, s: usize) -> Result<&crate::model::DistributionSet<Matrix>, BellmanError> {
    match &model.ambiguity {
        Ambiguity::S(sets) => {
            let p = &sets[s];
            if p.is_empty() {
                Err(BellmanError::EmptySet(format!("state {s}")))
            } else {
                Ok(p)
            }
        }
        _ => unreachable!("caller checked rectangularity"),
    }
}

/// `sup_{phi in Q} inf_{p_s in P_s} sum_a phi(a) [r(s,a) + gamma p_{s,a}.u]`.
pub fn cell_supinf(model: &RobustMdp, s: usize, u: &[f64]) -> Result<CellSolution, BellmanError> {
    let phis = model.controller.canonical_vertices(model.n_actions());
    match &model.ambiguity {
        Ambiguity::General(_) => Err(BellmanError::General),
        Ambiguity::Sa(_) => {
            // the inner inf splits across actions, leaving a linear objective in phi
            let (c, args) = sa_minima(model, s, u)?;
            let (v, value) = argmax(phis.iter().map(|phi| dot(phi, &c))).expect("Q is non-empty");
            Ok(CellSolution { value, controller: phis[v].clone(), adversary: AdversaryArg::PerAction(args) })
        }
        Ambiguity::S(_) => {
            let p = state_set(model, s)?;
            let c: Vec<Row> = p.vertices.iter().map(|m| action_values(model, s, m, u)).collect();
            if model.controller.mixes() {
                let payoffs: Vec<Row> = c.iter().map(|ck| phis.iter().map(|phi| dot(phi, ck)).collect()).collect();
                let sol = lp_maxmin(&payoffs)?;
                let controller = mix(&sol.weights, &phis);
                let (k, _) = argmin(c.iter().map(|ck| dot(&controller, ck))).expect("non-empty");
                Ok(CellSolution { value: sol.value, controller, adversary: AdversaryArg::Vertex(k) })
            } else {
                let mut best: Option<(f64, usize, usize)> = None;
                for (v, phi) in phis.iter().enumerate() {
                    let (k, worst) = argmin(c.iter().map(|ck| dot(phi, ck))).expect("non-empty");
                    if best.is_none_or(|(b, _, _)| worst > b) {
                        best = Some((worst, v, k));
                    }
                }
                let (value, v, k) = best.expect("Q is non-empty");
                Ok(CellSolution { value, controller: phis[v].clone(), adversary: AdversaryArg::Vertex(k) })
            }
        }
    }
}

/// `inf_{p_s in P_s} sup_{phi in Q} sum_a phi(a) [r(s,a) + gamma p_{s,a}.u]`.
pub fn cell_infsup(model: &RobustMdp, s: usize, u: &[f64]) -> Result<CellSolution, BellmanError> {
    let phis = model.controller.canonical_vertices(model.n_actions());
    match &model.ambiguity {
        Ambiguity::General(_) => Err(BellmanError::General),
        Ambiguity::Sa(_) => {
            // the best response is monotone in each action value, so the
            // componentwise minimum is the adversary's optimum
            let (c, args) = sa_minima(model, s, u)?;
            let (v, value) = argmax(phis.iter().map(|phi| dot(phi, &c))).expect("Q is non-empty");
            Ok(CellSolution { value, controller: phis[v].clone(), adversary: AdversaryArg::PerAction(args) })
        }
        Ambiguity::S(_) => {
            let p = state_set(model, s)?;
            let c: Vec<Row> = p.vertices.iter().map(|m| action_values(model, s, m, u)).collect();
            if p.kind == SetKind::ConvexHull && p.len() > 1 {
                // min over adversary mixtures of the max over controller vertices
                let payoffs: Vec<Row> =
                    phis.iter().map(|phi| c.iter().map(|ck| -dot(phi, ck)).collect()).collect();
                let sol = lp_maxmin(&payoffs)?;
                let mixed = mix(&sol.weights, &c);
                let (v, value) = argmax(phis.iter().map(|phi| dot(phi, &mixed))).expect("non-empty");
                Ok(CellSolution { value, controller: phis[v].clone(), adversary: AdversaryArg::Mixture(sol.weights) })
            } else {
                let mut best: Option<(f64, usize, usize)> = None;
                for (k, ck) in c.iter().enumerate() {
                    let (v, response) = argmax(phis.iter().map(|phi| dot(phi, ck))).expect("non-empty");
                    if best.is_none_or(|(b, _, _)| response < b) {
                        best = Some((response, v, k));
                    }
                }
                let (value, v, k) = best.expect("P_s is non-empty");
                Ok(CellSolution { value, controller: phis[v].clone(), adversary: AdversaryArg::Vertex(k) })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ControllerSet, DistributionSet};
    use approx::assert_abs_diff_eq;

    /// I, G, B with the two coupled kernels at I and unscaled rewards.
    fn three_state(gamma: f64) -> RobustMdp {
        let to_i = vec![vec![1.0, 0.0, 0.0]; 2];
        RobustMdp::new(
            vec!["I".into(), "G".into(), "B".into()],
            vec!["a1".into(), "a2".into()],
            vec![0.0, 0.0, 1.0, 1.0, 0.0, 0.0],
            gamma,
            Ambiguity::S(vec![
                DistributionSet::finite(vec![
                    vec![vec![0.0, 0.0, 1.0], vec![0.0, 1.0, 0.0]],
                    vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
                ]),
                DistributionSet::singleton(to_i.clone()),
                DistributionSet::singleton(to_i),
            ]),
            ControllerSet::simplex(),
        )
        .unwrap()
    }

    #[test]
    fn supinf_at_fixed_point_is_zero() {
        let m = three_state(0.9);
        let sol = cell_supinf(&m, 0, &[0.0, 1.0, -1.0]).unwrap();
        assert_abs_diff_eq!(sol.value, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.controller[0], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn infsup_at_fixed_point_is_gamma() {
        let m = three_state(0.9);
        let sol = cell_infsup(&m, 0, &[0.0, 1.0, -1.0]).unwrap();
        assert_abs_diff_eq!(sol.value, 0.9, epsilon = 1e-12);
    }

    #[test]
    fn singleton_is_classical_backup() {
        let mut m = three_state(0.5);
        m.controller = ControllerSet::dirac();
        let u = [2.0, 1.0, -1.0];
        let sup = cell_supinf(&m, 1, &u).unwrap();
        let inf = cell_infsup(&m, 1, &u).unwrap();
        assert_eq!(sup.value, 1.0 + 0.5 * 2.0);
        assert_eq!(sup.value, inf.value);
    }

    #[test]
    fn three_state_lemma_cell() {
        let g = 0.8;
        let m = RobustMdp::new(
            vec!["I".into(), "B".into(), "C".into()],
            vec!["a1".into(), "a2".into()],
            vec![0.0, 0.0, 0.6, 0.6, 0.0, 0.0],
            g,
            Ambiguity::S(vec![
                DistributionSet::finite(vec![
                    vec![vec![1.0, 0.0, 0.0], vec![0.5, 0.5, 0.0]],
                    vec![vec![0.0, 0.5, 0.5], vec![0.5, 0.0, 0.5]],
                ]),
                DistributionSet::singleton(vec![vec![0.0, 1.0, 0.0]; 2]),
                DistributionSet::singleton(vec![vec![0.0, 0.0, 1.0]; 2]),
            ]),
            ControllerSet::simplex(),
        )
        .unwrap();
        let sol = cell_supinf(&m, 0, &[1.0, 3.0, 0.0]).unwrap();
        assert_abs_diff_eq!(sol.value, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.controller[0], 0.75, epsilon = 1e-12);
    }

    #[test]
    fn hull_adversary_infsup_mixes() {
        let mut m = three_state(0.9);
        if let Ambiguity::S(sets) = &mut m.ambiguity {
            sets[0].kind = SetKind::ConvexHull;
        }
        let u = [0.0, 1.0, -1.0];
        // the even mixture makes both actions worth 0
        let inf = cell_infsup(&m, 0, &u).unwrap();
        assert_abs_diff_eq!(inf.value, 0.0, epsilon = 1e-12);
        match inf.adversary {
            AdversaryArg::Mixture(w) => assert_abs_diff_eq!(w[0], 0.5, epsilon = 1e-12),
            other => panic!("{other:?}"),
        }
        let sup = cell_supinf(&m, 0, &u).unwrap();
        assert_abs_diff_eq!(sup.value, inf.value, epsilon = 1e-12);
    }

    #[test]
    fn dirac_controller_enumerates() {
        let mut m = three_state(0.9);
        m.controller = ControllerSet::dirac();
        let sol = cell_supinf(&m, 0, &[0.0, 1.0, -1.0]).unwrap();
        assert_abs_diff_eq!(sol.value, -0.9, epsilon = 1e-12);
        assert_eq!(sol.controller, vec![1.0, 0.0]);
    }
}
