//! Batch front door: parses a JSON run configuration, dispatches to the
//! library, and emits machine-readable result files.
//!
//! Exit codes: 0 success; 1 configuration or schema violation; 2 resource
//! guard or non-convergence (best-so-far output is still written); 3
//! sampler-health warnings escalated by `--strict`.

mod cmd_finite_m;
mod cmd_simulate;
mod cmd_solve;
mod config;
mod output;

use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "pspin",
    version,
    about = "Free energy of mixed p-spin spherical spin glasses"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Minimize the free-energy functional over k-step order parameters.
    Solve(RunArgs),
    /// Evaluate the finite-M recursive functional along a list of M values.
    #[command(name = "finite-m")]
    FiniteM(RunArgs),
    /// Monte Carlo estimators and diagnostics on finite systems.
    Simulate(RunArgs),
}

#[derive(Args)]
pub struct RunArgs {
    /// Path to the JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overrides the config's out_dir; default ".").
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Master seed (overrides the config's seed).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Cap the worker-thread count. Results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Escalate sampler-health warnings to exit code 3.
    #[arg(long)]
    pub strict: bool,
}

impl RunArgs {
    /// Output directory precedence: flag, then config, then the current dir.
    pub fn out_dir(&self, from_config: Option<&Path>) -> PathBuf {
        self.out
            .clone()
            .or_else(|| from_config.map(Path::to_path_buf))
            .unwrap_or_else(|| PathBuf::from("."))
    }

    /// Seed precedence: flag, then config, then 0.
    pub fn master_seed(&self, from_config: Option<u64>) -> u64 {
        self.seed.or(from_config).unwrap_or(0)
    }
}

/// A failed run, already classified under the exit-code contract.
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }

    pub fn resource(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn from_core(e: pspin_core::error::Error) -> Self {
        use pspin_core::error::Error::*;
        let code = match &e {
            Domain(_) | Validation(_) | Insufficient(_) => 1,
            CostGuard(_) | Numerical(_) => 2,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let args = match &cli.command {
        Command::Solve(a) | Command::FiniteM(a) | Command::Simulate(a) => a,
    };
    if let Some(t) = args.threads {
        pspin_core::set_thread_cap(t.max(1));
    }
    let outcome = match &cli.command {
        Command::Solve(a) => cmd_solve::run(a),
        Command::FiniteM(a) => cmd_finite_m::run(a),
        Command::Simulate(a) => cmd_simulate::run(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
