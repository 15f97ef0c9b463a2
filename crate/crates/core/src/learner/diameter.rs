use crate::model::Kernel;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

/// Largest expected hitting time between two distinct states.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Diameter {
    Finite { hitting: f64 },
    Infinite,
}

impl Diameter {
    /// The integer bound `D`, rounding up past a `1e-8` slack.
    pub fn bound(self) -> Option<u64> {
        match self {
            Diameter::Finite { hitting } => Some((hitting - 1e-8).ceil().max(0.0) as u64),
            Diameter::Infinite => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Diameter::Finite { .. })
    }
}

const HIT_TOL: f64 = 1e-9;
const HIT_CAP: usize = 10_000_000;

/// States that reach `target` with positive probability. The uniform rule plays
/// every action, so this is the same set with or without a choice of actions.
fn can_reach(kernel: &Kernel, target: usize) -> Vec<bool> {
    let (ns, na) = (kernel.n_states(), kernel.n_actions());
    let mut ok = vec![false; ns];
    ok[target] = true;
    loop {
        let mut changed = false;
        for s in 0..ns {
            if ok[s] {
                continue;
            }
            let hit = |a: usize| kernel.row(s, a).iter().zip(&ok).any(|(&p, &o)| p > 0.0 && o);
            if (0..na).any(hit) {
                ok[s] = true;
                changed = true;
            }
        }
        if !changed {
            return ok;
        }
    }
}

/// Minimal expected hitting times to `target`, by value iteration from zero.
fn min_hitting(kernel: &Kernel, target: usize) -> Option<Vec<f64>> {
    let (ns, na) = (kernel.n_states(), kernel.n_actions());
    if can_reach(kernel, target).iter().any(|&r| !r) {
        return None;
    }
    let mut h = vec![0.0; ns];
    for _ in 0..HIT_CAP {
        let next: Vec<f64> = (0..ns)
            .map(|s| {
                if s == target {
                    0.0
                } else {
                    (0..na)
                        .map(|a| 1.0 + kernel.row(s, a).iter().zip(&h).map(|(p, x)| p * x).sum::<f64>())
                        .fold(f64::INFINITY, f64::min)
                }
            })
            .collect();
        let change = next.iter().zip(&h).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        h = next;
        if change <= HIT_TOL {
            return Some(h);
        }
    }
    Some(h)
}

/// `max_{s != s'} min_policy E[time to hit s' from s]`.
pub fn exact_diameter(kernel: &Kernel) -> Diameter {
    let ns = kernel.n_states();
    let mut worst: f64 = 0.0;
    for target in 0..ns {
        match min_hitting(kernel, target) {
            Some(h) => worst = worst.max(h.iter().copied().fold(0.0, f64::max)),
            None => return Diameter::Infinite,
        }
    }
    Diameter::Finite { hitting: worst }
}

/// Largest expected hitting time under the uniform decision rule; at least the exact diameter.
pub fn uniform_hitting_bound(kernel: &Kernel) -> Diameter {
    let (ns, na) = (kernel.n_states(), kernel.n_actions());
    let mut worst: f64 = 0.0;
    for target in 0..ns {
        if can_reach(kernel, target).iter().any(|&r| !r) {
            return Diameter::Infinite;
        }
        let others: Vec<usize> = (0..ns).filter(|&s| s != target).collect();
        if others.is_empty() {
            continue;
        }
        let k = others.len();
        let mut a = DMatrix::<f64>::identity(k, k);
        for (i, &s) in others.iter().enumerate() {
            for act in 0..na {
                for (j, &x) in others.iter().enumerate() {
                    a[(i, j)] -= kernel.row(s, act)[x] / na as f64;
                }
            }
        }
        let Some(h) = a.lu().solve(&DVector::from_element(k, 1.0)) else {
            return Diameter::Infinite;
        };
        worst = worst.max(h.max());
    }
    Diameter::Finite { hitting: worst }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k(ns: usize, na: usize, rows: &[Vec<f64>]) -> Kernel {
        Kernel::from_rows(ns, na, rows).unwrap()
    }

    #[test]
    fn swap_chain() {
        let kern = k(2, 1, &[vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert_eq!(exact_diameter(&kern).bound(), Some(1));
        assert_eq!(uniform_hitting_bound(&kern).bound(), Some(1));
    }

    #[test]
    fn directed_three_cycle() {
        let kern = k(3, 1, &[vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0]]);
        assert_eq!(exact_diameter(&kern).bound(), Some(2));
        assert_eq!(uniform_hitting_bound(&kern).bound(), Some(2));
    }

    #[test]
    fn absorbing_state_is_not_communicating() {
        let kern = k(2, 1, &[vec![1.0, 0.0], vec![0.5, 0.5]]);
        assert_eq!(exact_diameter(&kern), Diameter::Infinite);
        assert_eq!(uniform_hitting_bound(&kern), Diameter::Infinite);
    }

    #[test]
    fn choice_shortens_hitting() {
        // action 0 stays, action 1 moves
        let kern = k(2, 2, &[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert_eq!(exact_diameter(&kern).bound(), Some(1));
        assert_eq!(uniform_hitting_bound(&kern).bound(), Some(2));
    }
}
