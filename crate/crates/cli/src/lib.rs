//! Command-line front end.

pub mod args;
mod commands;

use args::Cli;
use clap::Parser;
use serde::Serialize;
use std::ffi::OsString;
use std::io::Write;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Domain(String),
    #[error(transparent)]
    Model(#[from] rmdp::model::ModelError),
    #[error(transparent)]
    Bellman(#[from] rmdp::bellman::BellmanError),
    #[error(transparent)]
    Policy(#[from] rmdp::policy::PolicyError),
    #[error(transparent)]
    Dpp(#[from] rmdp::dpp::DppError),
    #[error(transparent)]
    Learner(#[from] rmdp::learner::LearnerError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Serialize)]
struct RunReport<'a> {
    command: &'a str,
    config: &'a Cli,
    payload: serde_json::Value,
    version: &'static str,
    wall_time_ms: u64,
}

/// Parses `argv`, runs the command and writes its output. Returns the exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let rendered = e.render().to_string();
            let _ = if code == 0 { out.write_all(rendered.as_bytes()) } else { err.write_all(rendered.as_bytes()) };
            return code;
        }
    };
    match execute(&cli) {
        Ok(text) => {
            let written = match &cli.flags.out {
                Some(path) => std::fs::write(path, &text).map_err(|e| format!("cannot write {}: {e}", path.display())),
                None => out.write_all(text.as_bytes()).map_err(|e| e.to_string()),
            };
            match written {
                Ok(()) => 0,
                Err(e) => {
                    let _ = writeln!(err, "error: {e}");
                    1
                }
            }
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli) -> Result<String, CliError> {
    commands::check_flags(cli)?;
    let start = Instant::now();
    let outcome = commands::dispatch(cli)?;
    if cli.flags.csv {
        return Ok(outcome.csv.expect("checked by check_flags"));
    }
    if cli.flags.text {
        return Ok(outcome.text);
    }
    let report = RunReport {
        command: cli.command.name(),
        config: cli,
        payload: outcome.payload,
        version: env!("CARGO_PKG_VERSION"),
        wall_time_ms: start.elapsed().as_millis() as u64,
    };
    Ok(serde_json::to_string_pretty(&report).expect("report serializes") + "\n")
}
