//! The Markov chain on (controller memory, adversary memory, state).

use super::{Adversary, Controller};
use crate::model::RobustMdp;
use nalgebra::{DMatrix, DVector};
use std::collections::{HashMap, VecDeque};
use std::hash::Hash;

pub(crate) type Node<C, A> = (<C as Controller>::Memory, <A as Adversary>::Memory, usize);

pub(crate) struct Chain<K> {
    pub keys: Vec<K>,
    pub index: HashMap<K, usize>,
    /// Expected one-step reward.
    pub reward: Vec<f64>,
    pub next: Vec<Vec<(usize, f64)>>,
}

/// One step from `node`: expected reward and merged successor weights.
pub(crate) fn step<C: Controller, A: Adversary>(
    model: &RobustMdp,
    pi: &C,
    kappa: &A,
    node: &Node<C, A>,
) -> (f64, Vec<(Node<C, A>, f64)>) {
    let (mc, ma, s) = node;
    let rule = pi.decide(mc, *s);
    let mut reward = 0.0;
    let mut out: Vec<(Node<C, A>, f64)> = Vec::new();
    for (a, &pa) in rule.iter().enumerate() {
        if pa <= 0.0 {
            continue;
        }
        reward += pa * model.reward(*s, a);
        for (s2, &p) in kappa.row(ma, *s, a).iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            let key = (pi.update(mc, *s, a, s2), kappa.update(ma, *s, a, s2), s2);
            match out.iter_mut().find(|(k, _)| *k == key) {
                Some((_, w)) => *w += pa * p,
                None => out.push((key, pa * p)),
            }
        }
    }
    (reward, out)
}

/// Breadth-first construction from the start states; `None` above `cap` nodes.
pub(crate) fn build<C: Controller, A: Adversary>(
    model: &RobustMdp,
    pi: &C,
    kappa: &A,
    starts: &[usize],
    cap: usize,
) -> Option<Chain<Node<C, A>>>
where
    Node<C, A>: Hash + Eq + Clone,
{
    let mut chain = Chain { keys: Vec::new(), index: HashMap::new(), reward: Vec::new(), next: Vec::new() };
    let mut queue = VecDeque::new();
    for &s in starts {
        let key = (pi.initial_memory(), kappa.initial_memory(), s);
        if !chain.index.contains_key(&key) {
            chain.index.insert(key.clone(), chain.keys.len());
            chain.keys.push(key);
            queue.push_back(chain.keys.len() - 1);
        }
    }
    let mut expanded = vec![];
    while let Some(i) = queue.pop_front() {
        let (r, succ) = step(model, pi, kappa, &chain.keys[i]);
        let mut edges = Vec::with_capacity(succ.len());
        for (key, w) in succ {
            let j = match chain.index.get(&key) {
                Some(&j) => j,
                None => {
                    if chain.keys.len() >= cap {
                        return None;
                    }
                    let j = chain.keys.len();
                    chain.index.insert(key.clone(), j);
                    chain.keys.push(key);
                    queue.push_back(j);
                    j
                }
            };
            edges.push((j, w));
        }
        expanded.push((i, r, edges));
    }
    chain.reward = vec![0.0; chain.keys.len()];
    chain.next = vec![Vec::new(); chain.keys.len()];
    for (i, r, edges) in expanded {
        chain.reward[i] = r;
        chain.next[i] = edges;
    }
    Some(chain)
}

/// Solves `(I - gamma P) v = r`; returns the values and the residual sup-norm.
pub(crate) fn solve_linear(reward: &[f64], next: &[Vec<(usize, f64)>], gamma: f64) -> Option<(Vec<f64>, f64)> {
    let n = reward.len();
    let mut a = DMatrix::<f64>::identity(n, n);
    for (i, edges) in next.iter().enumerate() {
        for &(j, w) in edges {
            a[(i, j)] -= gamma * w;
        }
    }
    let b = DVector::from_column_slice(reward);
    let v = a.clone().lu().solve(&b)?;
    let residual = (&a * &v - &b).amax();
    Some((v.as_slice().to_vec(), residual))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_solve_of_two_state_cycle() {
        // 0 -> 1 -> 0 with rewards 1, 0
        let (v, res) = solve_linear(&[1.0, 0.0], &[vec![(1, 1.0)], vec![(0, 1.0)]], 0.5).unwrap();
        assert!((v[0] - 1.0 / (1.0 - 0.25)).abs() < 1e-12);
        assert!((v[1] - 0.5 / (1.0 - 0.25)).abs() < 1e-12);
        assert!(res < 1e-12);
    }
}
