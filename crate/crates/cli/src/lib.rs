//! The `sce` command-line tool: reads a scenario document, runs one solver
//! and writes CSV.

pub mod commands;
pub mod output;
pub mod scenario;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, unreadable or invalid scenario.
    #[error("{0}")]
    Usage(String),
    /// A solver failed or did not converge.
    #[error("{0}")]
    Numeric(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 1,
            CliError::Numeric(_) => 2,
        }
    }
}

impl From<sce_core::Error> for CliError {
    fn from(e: sce_core::Error) -> Self {
        use sce_core::Error as E;
        match e {
            E::Usage(_) | E::Invalid(_) | E::TooLarge { .. } | E::NotApplicable(_) => CliError::Usage(e.to_string()),
            E::NumericFailure { .. } | E::Singular(_) | E::NoConvergence { .. } => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(std::io::Error::other(e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "sce", version, about = "Nash and selfconfirming equilibria of linear-quadratic network games")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Opts,
}

#[derive(Debug, Args)]
pub struct Opts {
    /// Scenario JSON file.
    #[arg(long, short, global = true)]
    pub input: Option<PathBuf>,
    /// Output file (stdout if omitted).
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true)]
    pub max_iter: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Radius of the stability probes.
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    /// Number of stability probes.
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    #[arg(long, global = true, value_enum, default_value = "csv")]
    pub format: Format,
    /// Ignore unknown scenario keys instead of rejecting them.
    #[arg(long, global = true)]
    pub lenient: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Structural assumptions and interior-solution report for Z.
    Check,
    /// All Nash equilibria.
    Ne,
    /// All selfconfirming equilibria (Nash ones flagged).
    Sce,
    /// Belief-learning trajectory; summary JSON goes to a sidecar file.
    Learn,
    /// Analytic and sampled stability of every selfconfirming equilibrium.
    Stability,
    /// Fixed point of the global-externality model.
    GlobalSce,
    /// Fixed points over a grid of perceived centralities.
    PhiMap {
        /// Grid points per agent over the admissible range.
        #[arg(long, default_value_t = 5)]
        grid: usize,
    },
    /// Re-emit the scenario in canonical form.
    Normalize,
}

/// Parses `args` and runs the command. Returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match commands::dispatch(&cli, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
