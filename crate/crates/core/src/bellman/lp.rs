//! Max-min over a polytope of linear payoffs, solved as a matrix game.

use super::BellmanError;
use serde::{Deserialize, Serialize};

const PIVOT_EPS: f64 = 1e-12;

/// Value and maximizing mixture of a max-min problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxMin {
    pub value: f64,
    /// Convex weights over the columns of the payoff matrix.
    pub weights: Vec<f64>,
}

/// Computes `max_{w in simplex(V)} min_k sum_v w_v payoffs[k][v]`.
///
/// `payoffs` is `K x V`: one row per linear function, one column per vertex
/// of the maximizer's polytope. Solved by a dense tableau simplex with
/// Bland's rule, so ties resolve toward low column indices.
pub fn lp_maxmin(payoffs: &[Vec<f64>]) -> Result<MaxMin, BellmanError> {
    let k = payoffs.len();
    if k == 0 {
        return Err(BellmanError::EmptySet("payoff matrix has no rows".into()));
    }
    let v = payoffs[0].len();
    if v == 0 || payoffs.iter().any(|r| r.len() != v) {
        return Err(BellmanError::Degenerate("payoff rows must share a positive width".into()));
    }
    if payoffs.iter().flatten().any(|x| !x.is_finite()) {
        return Err(BellmanError::Degenerate("payoff matrix has non-finite entries".into()));
    }
    if v == 1 {
        return Ok(finish(payoffs, vec![1.0]));
    }
    if k == 1 {
        let row = &payoffs[0];
        let mut best = 0;
        for j in 1..v {
            if row[j] > row[best] {
                best = j;
            }
        }
        let mut w = vec![0.0; v];
        w[best] = 1.0;
        return Ok(finish(payoffs, w));
    }

    // shift so every entry is at least 1; the game value moves by the same amount
    let min = payoffs.iter().flatten().fold(f64::INFINITY, |m, &x| m.min(x));
    let shift = 1.0 - min;

    // max sum(y) s.t. A y <= 1, y >= 0, with A[j][i] = payoffs[i][j] + shift.
    // Columns: y_0..y_{k-1}, slacks k..k+v-1, then the right-hand side.
    let cols = k + v + 1;
    let mut t = vec![vec![0.0; cols]; v + 1];
    for j in 0..v {
        for i in 0..k {
            t[j][i] = payoffs[i][j] + shift;
        }
        t[j][k + j] = 1.0;
        t[j][cols - 1] = 1.0;
    }
    for i in 0..k {
        t[v][i] = -1.0;
    }
    let mut basis: Vec<usize> = (k..k + v).collect();

    loop {
        let entering = match (0..cols - 1).find(|&c| t[v][c] < -PIVOT_EPS) {
            Some(c) => c,
            None => break,
        };
        let mut leaving: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        for r in 0..v {
            let a = t[r][entering];
            if a > PIVOT_EPS {
                let ratio = t[r][cols - 1] / a;
                let better = match leaving {
                    None => true,
                    Some(l) => {
                        ratio < best_ratio - PIVOT_EPS
                            || (ratio <= best_ratio + PIVOT_EPS && basis[r] < basis[l])
                    }
                };
                if better {
                    leaving = Some(r);
                    best_ratio = ratio;
                }
            }
        }
        // entries of A are at least 1, so the program is bounded
        let r = leaving.ok_or_else(|| BellmanError::Degenerate("unbounded matrix game".into()))?;
        pivot(&mut t, r, entering);
        basis[r] = entering;
    }

    // dual prices on the slack rows are the maximizer's scaled weights
    let duals: Vec<f64> = (0..v).map(|j| t[v][k + j].max(0.0)).collect();
    let total: f64 = duals.iter().sum();
    if !(total > 0.0) {
        return Err(BellmanError::Degenerate("matrix game has no dual solution".into()));
    }
    Ok(finish(payoffs, duals.iter().map(|d| d / total).collect()))
}

fn pivot(t: &mut [Vec<f64>], r: usize, c: usize) {
    let p = t[r][c];
    for x in t[r].iter_mut() {
        *x /= p;
    }
    let pivot_row = t[r].clone();
    for (i, row) in t.iter_mut().enumerate() {
        if i == r {
            continue;
        }
        let f = row[c];
        if f != 0.0 {
            for (x, y) in row.iter_mut().zip(&pivot_row) {
                *x -= f * y;
            }
        }
    }
}

/// The value actually guaranteed by `weights`.
fn finish(payoffs: &[Vec<f64>], weights: Vec<f64>) -> MaxMin {
    let value = payoffs
        .iter()
        .map(|row| row.iter().zip(&weights).map(|(a, w)| a * w).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    MaxMin { value, weights }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn single_row_picks_best_vertex() {
        let s = lp_maxmin(&[vec![0.2, 0.7, 0.7]]).unwrap();
        assert_eq!(s.weights, vec![0.0, 1.0, 0.0]);
        assert_eq!(s.value, 0.7);
    }

    #[test]
    fn matching_pennies() {
        let s = lp_maxmin(&[vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap();
        assert_abs_diff_eq!(s.value, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.weights[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(s.weights[1], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn three_state_cell_at_fixed_point() {
        // action payoffs 0 + 0.8 * p.u with u = (1, 3, 0) on (I, B, C)
        let g = 0.8;
        let c1 = [g * 1.0, g * 0.5 * (1.0 + 3.0)];
        let c2 = [g * 0.5 * (3.0 + 0.0), g * 0.5 * (1.0 + 0.0)];
        let s = lp_maxmin(&[c1.to_vec(), c2.to_vec()]).unwrap();
        assert_abs_diff_eq!(s.value, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.weights[0], 0.75, epsilon = 1e-12);
    }

    #[test]
    fn dominated_column_gets_no_weight() {
        let s = lp_maxmin(&[vec![3.0, 1.0, 2.0], vec![0.0, 1.0, 2.0]]).unwrap();
        assert_abs_diff_eq!(s.value, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.weights[2], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(lp_maxmin(&[vec![f64::NAN, 1.0]]).is_err());
        assert!(lp_maxmin(&[]).is_err());
    }

    /// Brute-force reference over a fine grid of two-column mixtures.
    #[test]
    fn agrees_with_grid_on_two_columns() {
        let payoffs = vec![vec![0.3, 0.9], vec![0.8, 0.1], vec![0.5, 0.55]];
        let s = lp_maxmin(&payoffs).unwrap();
        let mut best = f64::NEG_INFINITY;
        for i in 0..=100_000 {
            let w = i as f64 / 100_000.0;
            let v = payoffs.iter().map(|r| w * r[0] + (1.0 - w) * r[1]).fold(f64::INFINITY, f64::min);
            best = best.max(v);
        }
        assert!(s.value >= best - 1e-9);
        assert!(s.value <= best + 1e-5);
    }
}
