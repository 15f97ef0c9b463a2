//! Finite robust Markov decision processes.
//!
//! * [`model`]: instances, ambiguity sets, controller sets, file format.
//! * [`bellman`]: sup-inf / inf-sup Bellman cells and fixed-point solvers.
//! * [`policy`]: finite-memory controllers and adversaries, simulation and evaluation.
//! * [`dpp`]: classification of the dynamic programming principle and gap witnesses.
//! * [`learner`]: the explore-then-exploit policy and its experiment harness.

pub mod model;
pub mod bellman;
pub mod sampling;
pub mod policy;
pub mod dpp;
pub mod learner;
