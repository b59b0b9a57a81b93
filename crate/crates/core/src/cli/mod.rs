//! The `synpa` command line: `train`, `simulate`, `compare` and `report`.
//!
//! Every command reads an optional JSON config; `--seed`, `--out-dir`,
//! `--policies` and `--reps` override the matching config keys. All inputs
//! are loaded and checked before anything is written.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub use commands::{cmd_compare, cmd_report, cmd_simulate, cmd_train, CommandOutput};
pub use config::{parse_policies, GroundTruthConfig, GroundTruthPreset, Overrides, RunConfig, TrainSettings};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "synpa",
    version,
    about = "Symbiotic thread-to-core allocation for 2-way SMT processors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit one regression model per SYNPA variant and save them as JSON.
    Train(CommonArgs),
    /// Run every policy on every workload and write result CSVs.
    Simulate(CommonArgs),
    /// Average speedups over the baseline, per workload and per kind.
    Compare(CommonArgs),
    /// Plot-ready speedup and horizontal-waste summaries by workload kind.
    Report(CommonArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Comma-separated policy names, e.g. SYNPA4_N,RANDOM_BASELINE.
    #[arg(long)]
    policies: Option<String>,
    /// Repetitions per workload and policy.
    #[arg(long)]
    reps: Option<u32>,
}

impl CommonArgs {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut config = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let overrides = Overrides {
            seed: self.seed,
            out_dir: self.out_dir.clone(),
            policies: self.policies.as_deref().map(parse_policies).transpose()?,
            repetitions: self.reps,
        };
        config.apply(&overrides);
        config.validate()?;
        Ok(config)
    }
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (args, command): (&CommonArgs, fn(&RunConfig) -> Result<CommandOutput, CliError>) = match &cli.command {
        Command::Train(a) => (a, cmd_train),
        Command::Simulate(a) => (a, cmd_simulate),
        Command::Compare(a) => (a, cmd_compare),
        Command::Report(a) => (a, cmd_report),
    };
    match args.resolve().and_then(|c| command(&c)) {
        Ok(out) => {
            print!("{}", out.text);
            0
        }
        Err(e) => {
            eprintln!("synpa: {e}");
            e.exit_code()
        }
    }
}
