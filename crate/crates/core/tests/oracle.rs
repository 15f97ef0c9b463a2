mod common;

use common::*;
use proptest::prelude::*;
use proptest::strategy::ValueTree;
use proptest::test_runner::TestRunner;
use rmdp::bellman::solve_supinf;
use rmdp::model::{Ambiguity, Matrix, MixedRadix, RobustMdp};
use rmdp::policy::*;
use std::time::Instant;

/// Linear-solve value of deterministic `actions` against rows `choice` (one per pair).
fn value(model: &RobustMdp, actions: &[usize], choice: &[usize]) -> Vec<f64> {
    let (ns, na) = (model.n_states(), model.n_actions());
    let Ambiguity::Sa(sets) = &model.ambiguity else { unreachable!() };
    let mut a = nalgebra::DMatrix::<f64>::identity(ns, ns);
    let mut b = nalgebra::DVector::<f64>::zeros(ns);
    for s in 0..ns {
        let z = s * na + actions[s];
        b[s] = model.reward(s, actions[s]);
        for (x, p) in sets[z].vertices[choice[z]].iter().enumerate() {
            a[(s, x)] -= model.gamma * p;
        }
    }
    a.lu().solve(&b).unwrap().as_slice().to_vec()
}

#[test]
fn brute_force_max_min_matches_the_bellman_value() {
    let start = Instant::now();
    let mut runner = TestRunner::deterministic();
    let strategy = (1usize..=3)
        .prop_flat_map(|ns| (sa_instance(ns, 2, 2, Some(false), Ctrl::Simplex), row(3)));
    let mut checked = 0;
    while checked < 50 {
        let (model, mu3) = strategy.new_tree(&mut runner).unwrap().current();
        if model.n_actions() != 2 {
            continue;
        }
        let ns = model.n_states();
        let mu = normalize(mu3[..ns].iter().map(|x| x + 0.1).collect());
        let Ambiguity::Sa(sets) = &model.ambiguity else { unreachable!() };
        let sizes: Vec<usize> = sets.iter().map(|s| s.len()).collect();
        let best = MixedRadix::new(vec![2; ns])
            .map(|actions| {
                MixedRadix::new(sizes.clone())
                    .map(|choice| value(&model, &actions, &choice).iter().zip(&mu).map(|(v, p)| v * p).sum::<f64>())
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(f64::NEG_INFINITY, f64::max);
        let u = solve_supinf(&model, 1e-11).unwrap().fixed_point;
        assert!((u.expect(&mu) - best).abs() <= 1e-7, "{} vs {best} on {model:?}", u.expect(&mu));
        checked += 1;
    }
    assert!(start.elapsed().as_secs() < 30);
}

/// Every Markov schedule of `depth` steps followed by each stationary vertex kernel.
fn markov_schedules(model: &RobustMdp, depth: usize) -> Vec<FiniteMemoryAdversary> {
    let Ambiguity::S(sets) = &model.ambiguity else { unreachable!() };
    let ns = model.n_states();
    let sizes: Vec<usize> = sets.iter().map(|p| p.len()).collect();
    let kernels: Vec<Vec<Matrix>> = MixedRadix::new(sizes)
        .map(|c| (0..ns).map(|s| sets[s].vertices[c[s]].clone()).collect())
        .collect();
    MixedRadix::new(vec![kernels.len(); depth + 1])
        .map(|idx| {
            let prefix = idx[..depth].iter().map(|&i| kernels[i].clone()).collect();
            FiniteMemoryAdversary::markov(model, prefix, vec![kernels[idx[depth]].clone()]).unwrap()
        })
        .collect()
}

#[test]
fn markov_class_brackets_enumerated_schedules() {
    let mut runner = TestRunner::deterministic();
    let strategy = s_instance(2, 2, 2, Some(false), Ctrl::Simplex).prop_flat_map(|m| {
        let (ns, na) = (m.n_states(), m.n_actions());
        let policy = (prop::collection::vec(row(na), 2 * ns), prop::collection::vec(0usize..2, 2 * ns * na * ns))
            .prop_map(move |(d, u)| FiniteMemoryPolicy::new(ns, na, 2, 0, d, u).unwrap());
        (Just(m), policy)
    });
    for _ in 0..20 {
        let (model, pi) = strategy.new_tree(&mut runner).unwrap().current();
        let mu = vec![1.0 / model.n_states() as f64; model.n_states()];
        let opts = RobustOptions::new(1e-10).with_class(AdversaryClass::Markov);
        let r = robust_evaluate_with(&model, &pi, &mu, opts).unwrap();
        let best = markov_schedules(&model, 4)
            .iter()
            .map(|k| evaluate_exact(&model, &pi, k, &mu, 1e-12).unwrap().value)
            .fold(f64::INFINITY, f64::min);
        assert!(r.lower_bound <= best + 1e-9, "lower bound {} above schedule value {best}", r.lower_bound);
        assert!(r.value <= best + 1e-8, "search value {} above schedule value {best}", r.value);
    }
}
