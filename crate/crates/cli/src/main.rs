//! Batch front door: reproducible experiments over the library, with
//! machine-readable CSV/JSON outputs and a manifest per run.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical divergence,
//! 4 state-space cap exceeded.

mod commands;
mod manifest;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hep_core::Error as CoreError;

#[derive(Debug, Parser)]
#[command(
    name = "hep",
    version,
    about = "Headway exclusion process laboratory: exact measures, currents, simulation, duality"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Potential description file (JSON).
    #[arg(long)]
    potential: std::path::PathBuf,
    /// Output directory for result files and the run manifest.
    #[arg(long, default_value = ".")]
    out: std::path::PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Exact stationary distribution vs the canonical headway measure.
    Stationary {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long = "L")]
        l: usize,
        #[arg(long = "N")]
        n: usize,
        /// Refuse state spaces larger than this many configurations.
        #[arg(long, default_value_t = 5000)]
        cap: usize,
    },
    /// Current-density relation plus finite-size columns.
    Current {
        #[command(flatten)]
        common: CommonArgs,
        /// Density grid start:end:step, e.g. 0.05:0.95:0.05.
        #[arg(long)]
        rho: String,
        /// Comma-separated torus sizes for finite-size columns.
        #[arg(long = "L", default_value = "")]
        l_list: String,
    },
    /// Kinetic Monte Carlo on the torus or the line.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Torus geometry L,N.
        #[arg(long, conflicts_with = "line")]
        torus: Option<String>,
        /// Line geometry N,XSTAR.
        #[arg(long)]
        line: Option<String>,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 1)]
        replicas: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Burn-in time; defaults to 0.1 * t.
        #[arg(long)]
        burn: Option<f64>,
        /// Initial configuration: occupation literal "0101.." (torus) or
        /// coordinate list "x1,x2,.." (line). Defaults to an evenly spread
        /// (torus) or packed (line) configuration.
        #[arg(long)]
        init: Option<String>,
        /// Comma-separated times at which to record configuration snapshots.
        #[arg(long)]
        snapshots: Option<String>,
    },
    /// Exact intertwining residual and Monte Carlo mixture check.
    Duality {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long = "N")]
        n: usize,
        /// Window width for the exact residual.
        #[arg(long, default_value_t = 24)]
        window: i64,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 10000)]
        replicas: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Command-level error with its process exit code.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
    CapExceeded(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::CapExceeded(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Numerical(m) | CliError::CapExceeded(m) => m,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::DivergentSeries(_)
            | CoreError::SeriesNotConverged { .. }
            | CoreError::NonUniqueStationary(_)
            | CoreError::RangeError(_)
            | CoreError::DepthExceeded { .. } => CliError::Numerical(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Stationary { common, l, n, cap } => commands::stationary(&common, l, n, cap),
        Command::Current {
            common,
            rho,
            l_list,
        } => commands::current(&common, &rho, &l_list),
        Command::Simulate {
            common,
            torus,
            line,
            t,
            replicas,
            seed,
            burn,
            init,
            snapshots,
        } => commands::simulate(&common, torus, line, t, replicas, seed, burn, init, snapshots),
        Command::Duality {
            common,
            n,
            window,
            t,
            replicas,
            seed,
        } => commands::duality(&common, n, window, t, replicas, seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
