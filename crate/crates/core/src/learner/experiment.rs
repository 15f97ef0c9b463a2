use super::{
    classical_value_iteration, effective_sample_size, exact_diameter, uniform_hitting_bound, EteMemory, EtePolicy,
    ExplorationState, LearnerError, SampleMode,
};
use crate::model::{Kernel, RobustMdp};
use crate::policy::chain::solve_linear;
use crate::policy::rollout;
use crate::sampling::stream_rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiameterSource {
    User,
    Exact,
    UniformBound,
}

/// Exact diameters are computed up to this many states; larger models use the uniform bound.
const EXACT_DIAMETER_STATES: usize = 200;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub gammas: Vec<f64>,
    pub seeds: Vec<u64>,
    pub mode: SampleMode,
    /// Overrides the computed diameter bound.
    pub diameter: Option<u64>,
    /// Vertex kernels to play against; all of them when absent.
    pub vertices: Option<Vec<usize>>,
    pub initial: Vec<f64>,
    pub evi_tol: f64,
    pub vertex_cap: usize,
}

impl ExperimentConfig {
    pub fn new(gammas: Vec<f64>, seeds: Vec<u64>, mode: SampleMode, initial: Vec<f64>) -> Self {
        ExperimentConfig { gammas, seeds, mode, diameter: None, vertices: None, initial, evi_tol: 1e-9, vertex_cap: 10_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapRow {
    pub gamma: f64,
    pub n: u64,
    pub m: u64,
    pub seed: u64,
    pub vertex_index: usize,
    pub achieved: f64,
    pub optimum: f64,
    /// `(1 - gamma) (optimum - achieved)`.
    pub normalized_gap: f64,
    /// Normalized loss of exploring for `n + 1` steps and then acting optimally.
    pub phase1_loss: f64,
    pub explored: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapSummary {
    pub gamma: f64,
    pub n: u64,
    pub m: u64,
    /// Mean normalized gap over seeds, per vertex.
    pub mean_gap: Vec<f64>,
    pub worst_vertex: usize,
    /// Largest entry of `mean_gap`.
    pub worst_case_gap: f64,
    /// Largest per-vertex mean of the phase-one loss.
    pub phase1_loss: f64,
    pub success_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapTable {
    pub mode: SampleMode,
    pub diameter: u64,
    pub diameter_source: DiameterSource,
    pub rows: Vec<GapRow>,
    pub summaries: Vec<GapSummary>,
}

impl GapTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("gamma,n,m,mode,seed,vertex_index,achieved,optimum,normalized_gap,phase1_loss,explored\n");
        for s in &self.summaries {
            for r in self.rows.iter().filter(|r| r.gamma == s.gamma) {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{},{}",
                    r.gamma,
                    r.n,
                    r.m,
                    self.mode,
                    r.seed,
                    r.vertex_index,
                    r.achieved,
                    r.optimum,
                    r.normalized_gap,
                    r.phase1_loss,
                    u8::from(r.explored)
                );
            }
            let _ = writeln!(
                out,
                "{},{},{},{},summary,{},,,{},{},{}",
                s.gamma, s.n, s.m, self.mode, s.worst_vertex, s.worst_case_gap, s.phase1_loss, s.success_rate
            );
        }
        out
    }
}

/// Exploration period `ceil(1 / sqrt(1 - gamma))`.
pub fn exploration_period(gamma: f64) -> u64 {
    (1.0 / (1.0 - gamma).sqrt()).ceil() as u64
}

fn stationary_value(kernel: &Kernel, rewards: &[f64], rules: &[Vec<f64>], gamma: f64) -> Result<Vec<f64>, LearnerError> {
    let (ns, na) = (kernel.n_states(), kernel.n_actions());
    let mut reward = vec![0.0; ns];
    let mut next = vec![Vec::new(); ns];
    for s in 0..ns {
        let mut row = vec![0.0; ns];
        for a in 0..na {
            let w = rules[s][a];
            if w == 0.0 {
                continue;
            }
            reward[s] += w * rewards[s * na + a];
            for (x, p) in kernel.row(s, a).iter().enumerate() {
                row[x] += w * p;
            }
        }
        next[s] = row.into_iter().enumerate().filter(|&(_, p)| p > 0.0).collect();
    }
    solve_linear(&reward, &next, gamma)
        .map(|(v, _)| v)
        .ok_or_else(|| LearnerError::Invalid("singular evaluation system".into()))
}

/// Runs the explore-then-exploit policy against each selected vertex kernel of
/// the model's ambiguity set and compares it with the clairvoyant optimum.
/// Seed `k` against vertex `v` uses stream `v` of seed `k`.
pub fn run_experiment(model: &RobustMdp, config: &ExperimentConfig) -> Result<GapTable, LearnerError> {
    let (ns, na) = (model.n_states(), model.n_actions());
    if config.initial.len() != ns || (config.initial.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(LearnerError::Invalid("initial distribution does not match the model".into()));
    }
    if config.gammas.iter().any(|g| !(*g > 0.0 && *g < 1.0)) || config.seeds.is_empty() {
        return Err(LearnerError::Invalid("need discounts in (0, 1) and at least one seed".into()));
    }
    let all = model.vertex_kernels(config.vertex_cap)?;
    let chosen: Vec<usize> = match &config.vertices {
        Some(v) => v.clone(),
        None => (0..all.len()).collect(),
    };
    if chosen.is_empty() || chosen.iter().any(|&v| v >= all.len()) {
        return Err(LearnerError::Invalid(format!("vertex selection out of range 0..{}", all.len())));
    }
    let mut diameter = 1;
    for &v in &chosen {
        let d = if ns <= EXACT_DIAMETER_STATES { exact_diameter(&all[v]) } else { uniform_hitting_bound(&all[v]) };
        match d.bound() {
            Some(b) => diameter = diameter.max(b),
            None => return Err(LearnerError::NotCommunicating { vertex: v }),
        }
    }
    let diameter_source = match config.diameter {
        Some(_) => DiameterSource::User,
        None if ns <= EXACT_DIAMETER_STATES => DiameterSource::Exact,
        None => DiameterSource::UniformBound,
    };
    let diameter = config.diameter.unwrap_or(diameter).max(1);

    let rewards = &model.rewards;
    let mu = &config.initial;
    let mut summaries = Vec::new();
    let mut rows = Vec::new();
    for &gamma in &config.gammas {
        let n = exploration_period(gamma);
        let m = effective_sample_size(n, diameter, ns, na, config.mode)?;
        let pi = EtePolicy::new(rewards.clone(), ns, na, gamma, n, m, config.evi_tol)?;
        let optimal: Vec<Vec<f64>> = chosen
            .iter()
            .map(|&v| Ok(classical_value_iteration(&all[v].rows(), rewards, na, gamma, 1e-11)?.0 .0))
            .collect::<Result<_, LearnerError>>()?;
        let jobs: Vec<(u64, usize)> = config.seeds.iter().flat_map(|&s| (0..chosen.len()).map(move |i| (s, i))).collect();
        let cell: Vec<GapRow> = jobs
            .par_iter()
            .map(|&(seed, i)| {
                let v = chosen[i];
                let kernel = &all[v];
                let (traj, mem) = rollout(model, &pi, kernel, mu, n as usize + 1, &mut stream_rng(seed, v as u64));
                let mut replay = ExplorationState::new(ns * na);
                for t in 0..n as usize {
                    replay.record(traj.states[t], traj.states[t + 1], na, n, m);
                }
                let EteMemory::Exploit(rules) = mem else {
                    unreachable!("the policy exploits after n + 1 steps")
                };
                let tail = gamma.powi(n as i32 + 1);
                let last = traj.states[n as usize + 1];
                let phase1 = traj.discounted_return(gamma);
                let exploit = stationary_value(kernel, rewards, &rules.0, gamma)?;
                let opt = &optimal[i];
                let optimum: f64 = mu.iter().zip(opt).map(|(p, x)| p * x).sum();
                let achieved = phase1 + tail * exploit[last];
                Ok(GapRow {
                    gamma,
                    n,
                    m,
                    seed,
                    vertex_index: v,
                    achieved,
                    optimum,
                    normalized_gap: (1.0 - gamma) * (optimum - achieved),
                    phase1_loss: (1.0 - gamma) * (optimum - phase1 - tail * opt[last]),
                    explored: replay.success(m),
                })
            })
            .collect::<Result<_, LearnerError>>()?;
        let k = config.seeds.len() as f64;
        let mean = |f: &dyn Fn(&GapRow) -> f64, v: usize| cell.iter().filter(|r| r.vertex_index == v).map(f).sum::<f64>() / k;
        let mean_gap: Vec<f64> = chosen.iter().map(|&v| mean(&|r| r.normalized_gap, v)).collect();
        let (wi, &worst) = mean_gap
            .iter()
            .enumerate()
            .fold((0, &f64::NEG_INFINITY), |best, (i, g)| if *g > *best.1 { (i, g) } else { best });
        let phase1_loss = chosen.iter().map(|&v| mean(&|r| r.phase1_loss, v)).fold(f64::NEG_INFINITY, f64::max);
        summaries.push(GapSummary {
            gamma,
            n,
            m,
            mean_gap,
            worst_vertex: chosen[wi],
            worst_case_gap: worst,
            phase1_loss,
            success_rate: cell.iter().filter(|r| r.explored).count() as f64 / cell.len() as f64,
        });
        rows.extend(cell);
    }
    Ok(GapTable { mode: config.mode, diameter, diameter_source, rows, summaries })
}
