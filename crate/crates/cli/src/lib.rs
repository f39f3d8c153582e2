//! Command-line driver: parses arguments, loads the JSON run configuration
//! and dispatches to one command. Exit codes: 0 success, 1 invalid
//! configuration or failed validation, 2 numerical or output failure,
//! 64 usage error.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::config::{Command, RunConfig};
use crate::error::{CliError, EXIT_OK, EXIT_USAGE, EXIT_VALIDATION};

#[derive(Debug, Parser)]
#[command(
    name = "wigner-clt",
    version,
    about = "Checks CLT predictions for linear eigenvalue statistics of generalized Wigner matrices",
    after_help = "Environment: WIGNER_CLT_THREADS overrides the configured thread count."
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Check normalization, symmetry and flatness of the variance profile
    ValidateProfile(RunArgs),
    /// Compute the predicted variance V(f) and bias B(f)
    Theory(RunArgs),
    /// Monte Carlo CLT experiment against the predictions
    Mc(RunArgs),
    /// Empirical resolvent and two-point local laws
    Locallaw(RunArgs),
    /// Monte Carlo experiments over a list of dimensions
    Sweep(RunArgs),
    /// Universal bulk and edge limits next to the finite-N prediction
    MesoLimits(RunArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// JSON run configuration
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Override the configured seed
    #[arg(long, value_name = "S")]
    seed: Option<u64>,
    /// Override the configured output directory
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

impl Cmd {
    fn split(self) -> (Command, RunArgs) {
        match self {
            Cmd::ValidateProfile(a) => (Command::ValidateProfile, a),
            Cmd::Theory(a) => (Command::Theory, a),
            Cmd::Mc(a) => (Command::Mc, a),
            Cmd::Locallaw(a) => (Command::Locallaw, a),
            Cmd::Sweep(a) => (Command::Sweep, a),
            Cmd::MesoLimits(a) => (Command::MesoLimits, a),
        }
    }
}

/// Loads the configuration named by the arguments, applies overrides and
/// runs the command.
fn dispatch(command: Command, args: RunArgs) -> Result<commands::Outcome, CliError> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(o) = args.out {
        cfg.output_dir = o;
    }
    commands::execute(command, &cfg)
}

/// Full CLI entry point; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    let (command, args) = cli.command.split();
    match dispatch(command, args) {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("{}", f.display());
            }
            if outcome.passed {
                eprintln!("{}: {}", command.name(), outcome.message);
                EXIT_OK
            } else {
                eprintln!("{}: validation failed: {}", command.name(), outcome.message);
                EXIT_VALIDATION
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Help text as printed by `--help`.
pub fn help_text() -> String {
    use clap::CommandFactory;
    Cli::command().render_long_help().to_string()
}
