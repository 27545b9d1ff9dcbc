//! Command-line front end: deterministic experiment runs with structured
//! result emission and replayable configuration.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Exit codes: 0 success, 2 configuration errors, 3 runtime singularity
/// (partial artifacts are kept), 4 verification failure.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    /// Trajectory hit a singularity; artifacts written so far are valid.
    Singularity(String),
    Verification(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Singularity(_) => 3,
            CliError::Verification(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "ballfall",
    about = "Event-driven simulator and cone-field analysis for falling elastic balls",
    version
)]
struct Cli {
    /// TOML config file whose sections mirror the subcommand flags;
    /// explicit flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Propagate a trajectory and emit the event log.
    Simulate(SimulateArgs),
    /// Estimate the Lyapunov spectrum over one or more seeds (CSV).
    Lyapunov(LyapunovArgs),
    /// Sufficiency verdict (or dichotomy classification) of a symbolic
    /// collision sequence.
    Sufficiency(SufficiencyArgs),
    /// Sweep the top mass over a grid: sufficiency onset and top
    /// exponent per (mass, seed) cell (CSV).
    Scan(ScanArgs),
    /// Strict cone-invariance check over a simulated segment.
    ConeCheck(ConeCheckArgs),
    /// Run the independent oracle suites against the implementation.
    Verify(VerifyArgs),
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Masses, non-increasing, as `p/q` rationals or decimals.
    #[arg(long)]
    masses: Option<String>,
    /// Seed for drawing the initial state on H = 1.
    #[arg(long)]
    seed: Option<u64>,
    /// Explicit initial positions (overrides --seed; requires --v).
    #[arg(long)]
    q: Option<String>,
    /// Explicit initial velocities.
    #[arg(long)]
    v: Option<String>,
    /// Stop after this many collisions.
    #[arg(long)]
    events: Option<u64>,
    /// Stop at this flow time.
    #[arg(long)]
    time: Option<f64>,
    /// Output path (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Rescale velocities to H = 1 every N events (0 = off).
    #[arg(long)]
    energy_renorm_every: Option<u64>,
    #[arg(long)]
    tol_sing: Option<f64>,
    #[arg(long)]
    tol_graze: Option<f64>,
    #[arg(long)]
    tol_ord: Option<f64>,
    #[arg(long)]
    tol_energy: Option<f64>,
}

#[derive(Args)]
pub struct LyapunovArgs {
    #[arg(long)]
    masses: Option<String>,
    /// Comma-separated seed list; one CSV row per seed.
    #[arg(long)]
    seeds: Option<String>,
    /// Collisions per run.
    #[arg(long)]
    events: Option<u64>,
    /// Re-orthonormalization stride for the tangent frames.
    #[arg(long)]
    renorm_every: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    tol_sing: Option<f64>,
    #[arg(long)]
    tol_graze: Option<f64>,
    #[arg(long)]
    tol_ord: Option<f64>,
    #[arg(long)]
    tol_energy: Option<f64>,
}

#[derive(Args)]
pub struct SufficiencyArgs {
    /// Sequence literal, e.g. `1-2,0-1` (0-1 is the floor).
    #[arg(long)]
    seq: Option<String>,
    /// Exact masses for the verdict.
    #[arg(long)]
    masses: Option<String>,
    /// Ball count (needed when --masses is omitted under --classify).
    #[arg(long)]
    n: Option<usize>,
    /// Classify the sequence over random rational masses instead of
    /// evaluating a single mass vector.
    #[arg(long)]
    classify: bool,
    /// Random mass draws for classification.
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct ScanArgs {
    /// Base masses; the top mass is replaced by the grid value.
    #[arg(long)]
    masses: Option<String>,
    /// Grid for the top mass as `lo:hi:steps`.
    #[arg(long)]
    vary_top: Option<String>,
    #[arg(long)]
    seeds: Option<String>,
    /// Event budget for the sufficiency-onset scan.
    #[arg(long)]
    onset_events: Option<u64>,
    /// Collisions for the spectrum estimate.
    #[arg(long)]
    collisions: Option<u64>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct ConeCheckArgs {
    #[arg(long)]
    masses: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Segment length in collisions.
    #[arg(long)]
    events: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct VerifyArgs {
    /// Randomized cases per suite.
    #[arg(long)]
    cases: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated suite subset (event-times, cocycle, ghost,
    /// enumeration); all when absent.
    #[arg(long)]
    suites: Option<String>,
    /// Bisection tolerance override for the event-time oracle.
    #[arg(long)]
    tol_bisect: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let file = match config::FileConfig::load(cli.config.as_deref()) {
        Ok(f) => f,
        Err(e) => return fail(e),
    };
    let result = match cli.command {
        Command::Simulate(args) => commands::simulate(args, file.simulate.unwrap_or_default()),
        Command::Lyapunov(args) => commands::lyapunov(args, file.lyapunov.unwrap_or_default()),
        Command::Sufficiency(args) => {
            commands::sufficiency(args, file.sufficiency.unwrap_or_default())
        }
        Command::Scan(args) => commands::scan(args, file.scan.unwrap_or_default()),
        Command::ConeCheck(args) => {
            commands::cone_check(args, file.cone_check.unwrap_or_default())
        }
        Command::Verify(args) => commands::verify(args, file.verify.unwrap_or_default()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}

fn fail(e: CliError) -> ExitCode {
    let label = match &e {
        CliError::Config(m) => format!("config error: {m}"),
        CliError::Singularity(m) => format!("singularity: {m}"),
        CliError::Verification(m) => format!("verification failed: {m}"),
        CliError::Io(m) => format!("io error: {m}"),
    };
    eprintln!("ballfall: {label}");
    ExitCode::from(e.exit_code())
}
