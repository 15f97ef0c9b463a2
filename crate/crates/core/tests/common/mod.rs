#![allow(dead_code)]

use proptest::prelude::*;
use rmdp::model::{Ambiguity, ControllerSet, DistributionSet, Matrix, RobustMdp, Row};

pub fn normalize(raw: Vec<f64>) -> Row {
    let t: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / t).collect()
}

/// A probability row with some exact zeros.
pub fn row(n: usize) -> impl Strategy<Value = Row> {
    prop::collection::vec(prop_oneof![1 => Just(0.0), 3 => 0.01f64..1.0], n).prop_map(move |mut r| {
        if r.iter().all(|&x| x == 0.0) {
            r[0] = 1.0;
        }
        normalize(r)
    })
}

pub fn matrix(ns: usize, na: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(row(ns), na)
}

fn names(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

#[derive(Clone, Copy, Debug)]
pub enum Ctrl {
    Simplex,
    Dirac,
    Hull,
    Finite,
}

fn controller(na: usize, kind: Ctrl) -> BoxedStrategy<ControllerSet> {
    match kind {
        Ctrl::Simplex => Just(ControllerSet::simplex()).boxed(),
        Ctrl::Dirac => Just(ControllerSet::dirac()).boxed(),
        Ctrl::Hull => prop::collection::vec(row(na), 1..=3).prop_map(ControllerSet::hull).boxed(),
        Ctrl::Finite => prop::collection::vec(row(na), 1..=3).prop_map(ControllerSet::finite).boxed(),
    }
}

fn set<T: Clone + std::fmt::Debug + 'static>(
    item: impl Strategy<Value = T> + 'static,
    max: usize,
    convex: Option<bool>,
) -> BoxedStrategy<DistributionSet<T>> {
    let kind = match convex {
        Some(c) => Just(c).boxed(),
        None => any::<bool>().boxed(),
    };
    (prop::collection::vec(item, 1..=max), kind)
        .prop_map(|(v, hull)| if hull { DistributionSet::hull(v) } else { DistributionSet::finite(v) })
        .boxed()
}

/// Dimensions, rewards and discount.
fn skeleton(max_s: usize, max_a: usize) -> impl Strategy<Value = (usize, usize, Vec<f64>, f64)> {
    (1..=max_s, 1..=max_a).prop_flat_map(|(ns, na)| {
        (Just(ns), Just(na), prop::collection::vec(0.0f64..=1.0, ns * na), 0.3f64..0.95)
    })
}

fn build(ns: usize, na: usize, rewards: Vec<f64>, gamma: f64, amb: Ambiguity, q: ControllerSet) -> RobustMdp {
    RobustMdp::new(names("s", ns), names("a", na), rewards, gamma, amb, q).expect("generated model is valid")
}

/// SA-rectangular instance; `convex` fixes the set kind when given.
pub fn sa_instance(max_s: usize, max_a: usize, max_set: usize, convex: Option<bool>, ctrl: Ctrl) -> impl Strategy<Value = RobustMdp> {
    skeleton(max_s, max_a).prop_flat_map(move |(ns, na, rewards, gamma)| {
        (prop::collection::vec(set(row(ns), max_set, convex), ns * na), controller(na, ctrl))
            .prop_map(move |(sets, q)| build(ns, na, rewards.clone(), gamma, Ambiguity::Sa(sets), q))
    })
}

/// S-rectangular instance.
pub fn s_instance(max_s: usize, max_a: usize, max_set: usize, convex: Option<bool>, ctrl: Ctrl) -> impl Strategy<Value = RobustMdp> {
    skeleton(max_s, max_a).prop_flat_map(move |(ns, na, rewards, gamma)| {
        (prop::collection::vec(set(matrix(ns, na), max_set, convex), ns), controller(na, ctrl))
            .prop_map(move |(sets, q)| build(ns, na, rewards.clone(), gamma, Ambiguity::S(sets), q))
    })
}

/// Any SA or S instance with any controller kind.
pub fn any_instance() -> BoxedStrategy<RobustMdp> {
    let ctrl = prop_oneof![Just(Ctrl::Simplex), Just(Ctrl::Dirac), Just(Ctrl::Hull), Just(Ctrl::Finite)];
    (ctrl, any::<bool>())
        .prop_flat_map(|(c, sa)| if sa { sa_instance(5, 3, 4, None, c).boxed() } else { s_instance(5, 3, 4, None, c).boxed() })
        .boxed()
}

pub fn values(n: usize, scale: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-scale..scale, n)
}

pub fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
