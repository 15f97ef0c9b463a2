//! Robust Bellman cells and fixed-point solvers.

mod cells;
mod lp;
mod solve;

pub use cells::{cell_infsup, cell_supinf, AdversaryArg, CellSolution};
pub use lp::{lp_maxmin, MaxMin};
pub use solve::{
    apply_infsup, apply_supinf, check_interchange, default_iteration_cap, solve_infsup, solve_infsup_with, solve_q,
    solve_q_with, solve_supinf, solve_supinf_with, structural_guarantee, InterchangeReport, NumericVerdict, QFn,
    SolveReport, SolverOptions, Structural, ValueFn,
};

pub(crate) use cells::{argmax, argmin};
pub(crate) use solve::{marginal_rows, stopping_threshold, sup_distance};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BellmanError {
    #[error("general (non-rectangular) ambiguity has no Bellman equation here; marginalize first")]
    General,
    #[error("empty set at {0}")]
    EmptySet(String),
    #[error("degenerate linear program: {0}")]
    Degenerate(String),
    #[error("no convergence after {iterations} iterations (last update {residual:e})")]
    IterationCap { iterations: usize, residual: f64 },
}
