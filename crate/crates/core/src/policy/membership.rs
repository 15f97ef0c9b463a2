//! Checks that decisions lie in the controller set and the ambiguity set.

use super::PolicyError;
use crate::bellman::lp_maxmin;
use crate::model::{Ambiguity, ControllerKind, ControllerSet, Matrix, RobustMdp, SetKind};

const EQUAL_TOL: f64 = 1e-12;
const HULL_TOL: f64 = 1e-9;

fn close(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= EQUAL_TOL)
}

/// Whether `point` is a convex combination of `vertices`, up to 1e-9 per entry.
pub fn row_in_hull(point: &[f64], vertices: &[Vec<f64>]) -> bool {
    if vertices.is_empty() {
        return false;
    }
    if vertices.iter().any(|v| close(v, point)) {
        return true;
    }
    // maximize over weights the least signed slack of every coordinate
    let mut payoffs = Vec::with_capacity(2 * point.len());
    for (i, &x) in point.iter().enumerate() {
        payoffs.push(vertices.iter().map(|v| x - v[i]).collect::<Vec<_>>());
        payoffs.push(vertices.iter().map(|v| v[i] - x).collect::<Vec<_>>());
    }
    match lp_maxmin(&payoffs) {
        Ok(sol) => sol.value >= -HULL_TOL,
        Err(_) => false,
    }
}

/// Whether the controller may play `row`.
pub fn row_in_controller_set(set: &ControllerSet, row: &[f64]) -> bool {
    match set.kind {
        ControllerKind::FullSimplex => true,
        ControllerKind::Dirac => row.iter().any(|&x| (x - 1.0).abs() <= EQUAL_TOL),
        ControllerKind::Finite => set.vertices.iter().any(|v| close(v, row)),
        ControllerKind::ConvexHull => row_in_hull(row, &set.vertices),
    }
}

/// Whether the adversary may use matrix `m` at state `s`.
pub fn matrix_in_set(model: &RobustMdp, s: usize, m: &Matrix) -> Result<bool, PolicyError> {
    let na = model.n_actions();
    if m.len() != na {
        return Ok(false);
    }
    match &model.ambiguity {
        Ambiguity::General(_) => Err(PolicyError::General),
        Ambiguity::Sa(sets) => Ok((0..na).all(|a| {
            let set = &sets[s * na + a];
            match set.kind {
                SetKind::Finite => set.vertices.iter().any(|v| close(v, &m[a])),
                SetKind::ConvexHull => row_in_hull(&m[a], &set.vertices),
            }
        })),
        Ambiguity::S(sets) => {
            let set = &sets[s];
            let flat = m.concat();
            Ok(match set.kind {
                SetKind::Finite => set.vertices.iter().any(|v| close(&v.concat(), &flat)),
                SetKind::ConvexHull => {
                    let verts: Vec<Vec<f64>> = set.vertices.iter().map(|v| v.concat()).collect();
                    row_in_hull(&flat, &verts)
                }
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hull_membership() {
        let verts = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]];
        assert!(row_in_hull(&[0.3, 0.7, 0.0], &verts));
        assert!(row_in_hull(&[1.0, 0.0, 0.0], &verts));
        assert!(!row_in_hull(&[0.3, 0.6, 0.1], &verts));
        assert!(!row_in_hull(&[0.5, 0.5, 0.0], &[]));
    }
}
