use clap::{Args, Parser, Subcommand, ValueEnum};
use rmdp::dpp::{FixtureId, InfoClass};
use rmdp::learner::SampleMode;
use serde::Serialize;
use std::path::PathBuf;

#[derive(Debug, Parser, Serialize)]
#[command(name = "rmdp", version, about = "Robust MDP solver, policy evaluator and DPP checker")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Args, Serialize)]
pub struct Flags {
    /// Model file (JSON).
    #[arg(long, global = true, value_name = "PATH")]
    pub model: Option<PathBuf>,
    /// Policy file (JSON).
    #[arg(long, global = true, value_name = "PATH")]
    pub policy: Option<PathBuf>,
    /// Discount factor; overrides the model's.
    #[arg(long, global = true, value_name = "F")]
    pub gamma: Option<f64>,
    #[arg(long, global = true, default_value_t = 1e-9, value_name = "F")]
    pub tol: f64,
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Monte Carlo trajectories; switches `evaluate` to simulation.
    #[arg(long, global = true, value_name = "N")]
    pub mc_samples: Option<usize>,
    /// Truncation target for exact and Monte Carlo evaluation.
    #[arg(long, global = true, value_name = "F")]
    pub horizon_eps: Option<f64>,
    /// Sample-size rule for the learner: `paper` or `practical:C`.
    #[arg(long, global = true, value_name = "MODE", value_parser = parse_mode)]
    pub mode: Option<SampleMode>,
    #[arg(long, global = true, conflicts_with = "text")]
    pub csv: bool,
    #[arg(long, global = true)]
    pub text: bool,
    /// Write the output here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

fn parse_mode(s: &str) -> Result<SampleMode, String> {
    s.parse().map_err(|e: rmdp::learner::LearnerError| e.to_string())
}

fn parse_fixture(s: &str) -> Result<FixtureId, String> {
    s.parse().map_err(|e: rmdp::dpp::DppError| e.to_string())
}

fn parse_info(s: &str) -> Result<InfoClass, String> {
    s.parse().map_err(|e: rmdp::dpp::DppError| e.to_string())
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AdversaryArg {
    Stationary,
    Markov,
    History,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Command {
    /// Check a model file against every invariant.
    Validate,
    /// Solve the sup-inf Bellman equation.
    Solve,
    /// Value of a policy against one vertex kernel of the ambiguity set.
    Evaluate {
        /// Index of the vertex kernel, in enumeration order.
        #[arg(long, default_value_t = 0)]
        vertex: usize,
        /// Initial state name, or `uniform`.
        #[arg(long, default_value = "uniform")]
        initial: String,
    },
    /// Worst-case value of a policy over the ambiguity set.
    RobustEval {
        #[arg(long, value_enum, default_value = "stationary")]
        adversary: AdversaryArg,
        #[arg(long, default_value = "uniform")]
        initial: String,
    },
    /// Classify the DPP for an information profile and check it numerically.
    CheckDpp {
        #[arg(long, value_parser = parse_info, value_name = "H|M|S")]
        controller_info: InfoClass,
        #[arg(long, value_parser = parse_info, value_name = "H|M|S")]
        adversary_info: InfoClass,
        #[arg(long, default_value = "uniform")]
        initial: String,
        /// Skip the witness search when no policy is given.
        #[arg(long)]
        no_search: bool,
    },
    /// Reproduce one of the shipped counterexamples.
    Counterexample {
        #[arg(value_parser = parse_fixture, value_name = "ID")]
        id: FixtureId,
        /// Directory to write the fixture model and witness policies to.
        #[arg(long, value_name = "DIR")]
        emit: Option<PathBuf>,
    },
    /// Explore-then-exploit gap experiment.
    LearnSim {
        /// Discount grid, comma separated; `--gamma` picks a single value.
        #[arg(long, value_delimiter = ',', default_value = "0.9,0.99,0.999")]
        gammas: Vec<f64>,
        /// Number of seeds, counting up from `--seed`.
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        /// Diameter bound to use instead of the computed one.
        #[arg(long)]
        diameter: Option<u64>,
        /// Vertex kernels to play against, comma separated.
        #[arg(long, value_delimiter = ',')]
        vertices: Option<Vec<usize>>,
        /// Initial state name, or `uniform`; defaults to the first state.
        #[arg(long)]
        initial: Option<String>,
    },
    /// Diameter of every vertex kernel.
    Diameter,
    /// The classification tables.
    Tables,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Solve => "solve",
            Command::Evaluate { .. } => "evaluate",
            Command::RobustEval { .. } => "robust-eval",
            Command::CheckDpp { .. } => "check-dpp",
            Command::Counterexample { .. } => "counterexample",
            Command::LearnSim { .. } => "learn-sim",
            Command::Diameter => "diameter",
            Command::Tables => "tables",
        }
    }

    pub fn has_csv(&self) -> bool {
        matches!(self, Command::Solve | Command::LearnSim { .. } | Command::Diameter)
    }
}
