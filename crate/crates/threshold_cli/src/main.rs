//! `threshold-toolkit`: scenario files in, JSON reports and CSV curves out.
//!
//! Exit status: 0 on success, 2 when the scenario fails validation, 3 when a
//! numerical stage fails or a reported tolerance is violated.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::Scenario;

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Numerical(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "validation error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<threshold_toolkit::Error> for CliError {
    fn from(e: threshold_toolkit::Error) -> Self {
        match e {
            threshold_toolkit::Error::Invalid(m) => CliError::Validation(m),
            threshold_toolkit::Error::Numerical(m) => CliError::Numerical(m),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "threshold-toolkit", version, about = "Threshold analysis of two-cluster scattering models")]
struct Cli {
    /// Scenario file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for randomized suites; overrides `seed` in the scenario.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for reports and curves.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
enum Command {
    /// Cluster lattice, projectors and channel classes of a particle system.
    Lattice,
    /// Randomized Grushin identity suite.
    GrushinVerify {
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Zero-energy classification of an effective operator.
    Classify,
    /// Angular spectrum and Hardy test of a critical channel.
    Critical,
    /// Leading resolvent law fits.
    Expand,
    /// Scattering length, cross-section curve and threshold S-matrix.
    Scatter,
    /// Reduced classical flow trajectory.
    Flow,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Lattice => "lattice",
            Command::GrushinVerify { .. } => "grushin-verify",
            Command::Classify => "classify",
            Command::Critical => "critical",
            Command::Expand => "expand",
            Command::Scatter => "scatter",
            Command::Flow => "flow",
        }
    }
}

pub struct Context {
    pub scenario: Scenario,
    pub seed: u64,
    pub out: PathBuf,
    pub verbose: bool,
}

impl Context {
    pub fn log(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("{}", msg.as_ref());
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("THRESHOLD_TOOLKIT_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Validation(format!("THRESHOLD_TOOLKIT_THREADS must be a positive integer, got {v:?}")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Validation(format!("cannot configure thread pool: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    let scenario = match &cli.config {
        Some(p) => Scenario::load(p)?,
        None => Scenario::default(),
    };
    if let Some(c) = &scenario.command {
        if c != cli.command.name() {
            return Err(CliError::Validation(format!(
                "scenario is for `{c}` but `{}` was requested",
                cli.command.name()
            )));
        }
    }
    let seed = cli.seed.or(scenario.seed).unwrap_or(0);
    std::fs::create_dir_all(&cli.out)
        .map_err(|e| CliError::Validation(format!("cannot create {}: {e}", cli.out.display())))?;
    let ctx = Context { scenario, seed, out: cli.out, verbose: cli.verbose };
    match cli.command {
        Command::Lattice => commands::lattice(&ctx),
        Command::GrushinVerify { trials } => commands::grushin_verify(&ctx, trials),
        Command::Classify => commands::classify(&ctx),
        Command::Critical => commands::critical(&ctx),
        Command::Expand => commands::expand(&ctx),
        Command::Scatter => commands::scatter(&ctx),
        Command::Flow => commands::flow(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
