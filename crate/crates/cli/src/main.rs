//! `biped` - command-line driver for the compass-gait walker pipeline.
//!
//! Subcommands cover each stage: step-period roots, the full bifurcation
//! report, single map applications, branch continuation in the slope
//! parameter, multi-step gait simulation, and dense trajectories for
//! plotting. Reports are JSON, traces are CSV; every JSON payload carries a
//! schema version and the effective configuration for reproducibility.

mod config;
mod output;
mod run;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "biped", version, about = "Passive compass-gait walker: heelstrike map, stability analysis and slope continuation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Full,
    Expanded,
    /// Both models side by side (continuation only).
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Json,
    Csv,
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Output format (default depends on the command).
    #[arg(long, global = true)]
    format: Option<FormatArg>,
    /// Shorthand for `--format json`.
    #[arg(long, global = true, conflicts_with = "format")]
    json: bool,
    /// Shorthand for `--format csv`.
    #[arg(long, global = true, conflicts_with_all = ["format", "json"])]
    csv: bool,
    /// Write the primary output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<std::path::PathBuf>,
    /// Multiply the integrator tolerances by this factor.
    #[arg(long, global = true)]
    tol_scale: Option<f64>,
    /// JSON config file; command-line flags take precedence over it.
    #[arg(long, global = true)]
    config: Option<std::path::PathBuf>,
    /// Model form for map-backed commands.
    #[arg(long, global = true, value_enum)]
    model: Option<ModelArg>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Step-period roots of the unperturbed gait equation.
    Roots {
        #[command(flatten)]
        common: CommonArgs,
        /// Search interval, two values: LO HI.
        #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
        interval: Option<Vec<f64>>,
    },
    /// Full bifurcation report: eigenstructure, selection root, slope, verdicts.
    Verify {
        #[command(flatten)]
        common: CommonArgs,
        /// Root bracket for the cycle-selection condition, two values: LO HI.
        #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
        theta0_bracket: Option<Vec<f64>>,
    },
    /// Apply the heelstrike return map once.
    #[command(allow_negative_numbers = true)]
    Map {
        #[command(flatten)]
        common: CommonArgs,
        theta: f64,
        omega: f64,
        delta: f64,
    },
    /// Continue the walking fixed point over a delta grid.
    #[command(name = "continue")]
    Continue {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated ascending delta grid.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
    },
    /// Simulate a walk of N steps from a perturbed fixed point.
    #[command(allow_negative_numbers = true)]
    Gait {
        #[command(flatten)]
        common: CommonArgs,
        delta: f64,
        n_steps: usize,
        /// Added to the fixed-point stance angle before the first step.
        perturbation: f64,
    },
    /// Dense trajectory of one swing phase, sampled for plotting.
    #[command(allow_negative_numbers = true)]
    Traj {
        #[command(flatten)]
        common: CommonArgs,
        theta: f64,
        omega: f64,
        delta: f64,
        t_end: f64,
        samples: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Roots { common, interval } => run::roots(common, interval),
        Command::Verify {
            common,
            theta0_bracket,
        } => run::verify(common, theta0_bracket),
        Command::Map {
            common,
            theta,
            omega,
            delta,
        } => run::map(common, theta, omega, delta),
        Command::Continue { common, grid } => run::continuation(common, grid),
        Command::Gait {
            common,
            delta,
            n_steps,
            perturbation,
        } => run::gait(common, delta, n_steps, perturbation),
        Command::Traj {
            common,
            theta,
            omega,
            delta,
            t_end,
            samples,
        } => run::traj(common, theta, omega, delta, t_end, samples),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", output::error_json(&err));
            if err.is_validation() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
