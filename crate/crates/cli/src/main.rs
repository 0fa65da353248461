//! `pmp-thermo`: engine solving, sweeps, figure data, verification and oracle runs.

mod commands;
mod config;
mod output;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

use pmp_thermo::lindblad::Bath;

#[derive(Parser, Debug)]
#[command(name = "pmp-thermo", version, about = "Minimal-dissipation protocols for a driven qubit between two baths")]
#[command(args_override_self = true)]
pub struct Cli {
    /// Inverse temperature of the cold bath (sets the energy unit).
    #[arg(long, global = true, default_value_t = 1.0)]
    beta_c: f64,
    /// Maximal coupling rate (sets the time unit).
    #[arg(long, global = true, default_value_t = 1.0)]
    gamma: f64,
    /// Text file of `key = value` lines mirroring the flags; flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Maximum-power engine for one temperature ratio.
    Engine(EngineArgs),
    /// Engine quantities over a grid of temperature ratios.
    Sweep(SweepArgs),
    /// Time series of one optimal isotherm.
    Isotherm(IsothermArgs),
    /// Full optimal protocol between two end points.
    Trajectory(TrajectoryArgs),
    /// Run the invariant suite.
    Verify(VerifyArgs),
    /// Compare a plan against exhaustive grid search.
    Oracle(OracleArgs),
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
pub struct EngineArgs {
    /// Temperature ratio beta_h/beta_c in (0, 1).
    #[arg(long)]
    pub z: f64,
    /// Also write the square-wave gap schedule to this CSV file.
    #[arg(long)]
    pub schedule: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    pub periods: usize,
    /// Length of each half period.
    #[arg(long, default_value_t = 1.0)]
    pub dtau: f64,
    /// Write the JSON here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
pub struct SweepArgs {
    #[arg(long, default_value_t = 0.02)]
    pub z_min: f64,
    #[arg(long, default_value_t = 0.98)]
    pub z_max: f64,
    #[arg(long, default_value_t = 50)]
    pub steps: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum BranchArg {
    Cold,
    Hot,
}

impl From<BranchArg> for Bath {
    fn from(b: BranchArg) -> Bath {
        match b {
            BranchArg::Cold => Bath::Cold,
            BranchArg::Hot => Bath::Hot,
        }
    }
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
pub struct IsothermArgs {
    #[arg(long, value_enum)]
    pub branch: BranchArg,
    #[arg(long)]
    pub z: f64,
    /// Conserved rate, non-positive.
    #[arg(long = "K", allow_negative_numbers = true)]
    pub k: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub u0: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub u1: f64,
    #[arg(long, default_value_t = 1000)]
    pub points: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
pub struct Endpoints {
    #[arg(long, default_value_t = 0.07)]
    pub p_in: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub u_in: f64,
    #[arg(long, default_value_t = 0.26)]
    pub p_out: f64,
    #[arg(long, default_value_t = 6.0, allow_negative_numbers = true)]
    pub u_out: f64,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
#[command(group = clap::ArgGroup::new("rate").required(true).args(["k", "deadline"]))]
pub struct TrajectoryArgs {
    #[arg(long)]
    pub z: f64,
    #[arg(long = "K", allow_negative_numbers = true)]
    pub k: Option<f64>,
    /// Total duration; picks the rate and cycle count with the least heat.
    #[arg(long)]
    pub deadline: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub cycles: usize,
    #[command(flatten)]
    pub ends: Endpoints,
    /// Plan as JSON (stdout when absent).
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Time series CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    pub points: usize,
    #[arg(long, default_value_t = 512)]
    pub max_cycles: usize,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
pub struct VerifyArgs {
    /// Write the per-check results as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
pub struct OracleArgs {
    #[arg(long, default_value_t = 0.3)]
    pub z: f64,
    #[arg(long = "K", default_value_t = -0.05, allow_negative_numbers = true)]
    pub k: f64,
    #[arg(long, default_value_t = 0)]
    pub cycles: usize,
    #[command(flatten)]
    pub ends: Endpoints,
    #[arg(long, default_value_t = 8)]
    pub intervals: usize,
    #[arg(long, default_value_t = 12)]
    pub levels: usize,
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pub u_min: f64,
    #[arg(long, default_value_t = 6.0, allow_negative_numbers = true)]
    pub u_max: f64,
    /// Allowed distance of the final population from `p_out`.
    #[arg(long, default_value_t = pmp_thermo::oracle::DEFAULT_TOLERANCE)]
    pub tolerance: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Failure classes and their exit codes.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Infeasible(String),
    Solver(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Infeasible(_) => 3,
            Failure::Solver(_) | Failure::Io(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Infeasible(m) | Failure::Solver(m) | Failure::Io(m) => m,
        }
    }
}

fn init_threads() {
    if let Some(n) = std::env::var("PMP_THERMO_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn main() -> ExitCode {
    let raw: Vec<String> = std::env::args().collect();
    let args = match config::expand(raw, &Cli::command()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    init_threads();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
