//! Batch front end: parse a scenario config, run one of the toolkit
//! pipelines, and emit CSV reports plus a reproducibility manifest.
//!
//! Exit codes: 0 ok, 2 config error, 3 runtime/infeasible, 4 I/O error.
//! Fatal errors go to stderr with a machine-parseable `error[...]` prefix.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rachsim::{ConfigError, ModelError};

#[derive(Debug, Parser)]
#[command(
    name = "rachsim",
    version,
    about = "RACH overload modeling: analysis, simulation, policy comparison and preamble-split optimization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Scenario configuration file (TOML).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory; overrides `output.directory` from the config.
    #[arg(long, value_name = "PATH")]
    out_dir: Option<PathBuf>,
    /// Base seed; overrides `sim.seed`.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Replication count; overrides `sim.replications`.
    #[arg(long, value_name = "N")]
    replications: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the analytical pipeline and write population, kernel, metrics and
    /// CDF tables.
    Analyze(CommonArgs),
    /// Run seeded simulation replications and write traces and empirical
    /// metrics.
    Simulate(CommonArgs),
    /// Run both paths and write a side-by-side table with relative errors.
    Compare(CommonArgs),
    /// Solve for the optimal H2H preamble share over the configured
    /// delay thresholds.
    Optimize(CommonArgs),
    /// Compare engine values against the brute-force oracles.
    Validate(CommonArgs),
    /// Sweep the split parameter and tabulate metrics per value.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Split parameter to sweep: `x` (ja) or `a` (da).
    #[arg(long, value_name = "x|a")]
    param: String,
    /// Inclusive value range, e.g. `1:53`.
    #[arg(long, value_name = "LO:HI")]
    range: String,
}

#[derive(Debug)]
enum CliError {
    Config(ConfigError),
    Runtime(String),
    Io(std::io::Error),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Analyze(args) => commands::analyze(args),
        Command::Simulate(args) => commands::simulate(args),
        Command::Compare(args) => commands::compare(args),
        Command::Optimize(args) => commands::optimize(args),
        Command::Validate(args) => commands::validate(args),
        Command::Sweep(args) => commands::sweep(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(e)) => {
            eprintln!("error[config/{}]: {e}", e.kind());
            ExitCode::from(2)
        }
        Err(CliError::Runtime(message)) => {
            eprintln!("error[runtime]: {message}");
            ExitCode::from(3)
        }
        Err(CliError::Io(e)) => {
            eprintln!("error[io]: {e}");
            ExitCode::from(4)
        }
    }
}
