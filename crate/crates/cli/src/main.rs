//! rebasesim command-line front end.
//!
//! Exit codes: 0 ok, 2 usage or configuration error, 3 runtime error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

mod commands;
mod config;

use config::RunArgs;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl From<rebasesim::InvalidParam> for CliError {
    fn from(e: rebasesim::InvalidParam) -> Self {
        CliError::Config(e.to_string())
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "rebasesim",
    version,
    about = "Rebasing stablecoin policy simulator and optimizer"
)]
struct Cli {
    /// Worker threads (0 = one per core). Output does not depend on this.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,

    /// Refuse to run without an explicit seed
    #[arg(long, global = true)]
    strict: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one market-cap path under a policy; writes path.csv and loss.json
    Simulate(RunArgs),
    /// Loss surface over the (A, B) grid; writes surface.csv, frontier.csv when --lambdas is given, run.json
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Also rerun under the drift and volatility robustness presets
        #[arg(long)]
        robustness: bool,
    },
    /// Loss-minimizing (A, B) per λ; writes frontier.csv, surface.csv, run.json
    Frontier(RunArgs),
    /// A-monotonicity and λ frontier under mu = +0.01, mu = -0.01 and sigma = 0.5
    Robustness(RunArgs),
    /// Replay a rebase history, optionally under an alternative policy
    Replay(ReplayArgs),
}

#[derive(clap::Args)]
pub struct ReplayArgs {
    /// History CSV with header `timestamp,price,supply`
    #[arg(long)]
    pub history: PathBuf,
    /// Output directory
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Counterfactual band half-width
    #[arg(long)]
    pub a: Option<f64>,
    /// Counterfactual adjustment divisor (initial value when switches are given)
    #[arg(long)]
    pub b: Option<f64>,
    /// Counterfactual divisor change, `DATE=B` (repeatable), e.g. 2019-10-30=10
    #[arg(long = "b-switch")]
    pub b_switch: Vec<String>,
    /// Target price
    #[arg(long, default_value_t = 1.0)]
    pub p_star: f64,
    /// Weight on squared supply change
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers)
        .build()
        .map_err(|e| CliError::Runtime(format!("cannot start worker pool: {e}")))?;
    let strict = cli.strict;
    pool.install(|| match &cli.command {
        Command::Simulate(args) => commands::simulate(args, strict),
        Command::Sweep { run, robustness } => commands::sweep(run, *robustness, strict),
        Command::Frontier(args) => commands::frontier(args, strict),
        Command::Robustness(args) => commands::robustness(args, strict),
        Command::Replay(args) => commands::replay(args),
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
