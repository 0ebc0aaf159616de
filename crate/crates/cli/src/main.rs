mod commands;
mod controller;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Fundamental performance limits of stochastic feedback loops.
#[derive(Debug, Parser)]
#[command(name = "fundlim", version, about)]
pub struct Cli {
    /// Base seed for simulation (overrides the config file's seed).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory that receives report files.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Norm orders, e.g. `2`, `1,2,inf`.
    #[arg(long = "p", global = true, value_name = "LIST")]
    pub p: Option<String>,
    /// Quadrature grid size for spectral integrals.
    #[arg(long, global = true, value_name = "N")]
    pub grid: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Poles, zeros, relative degree and Markov gain of a plant.
    Analyze { plant: PathBuf },
    /// Lower bound(s) for a disturbance, with or without a plant.
    Bound {
        #[arg(long)]
        plant: Option<PathBuf>,
        dist: PathBuf,
        /// T1, T2, T3, C2, C3, C4 or KS. Defaults to T1 with a plant, T3 without.
        #[arg(long)]
        theorem: Option<String>,
    },
    /// Simulate a closed loop and check the error and output bounds.
    Verify {
        plant: PathBuf,
        dist: PathBuf,
        /// zero | gain:<c> | arma:<b0,b1,...;a1,a2,...>
        #[arg(long)]
        controller: String,
        /// Simulation config JSON.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Entropy rate from a disturbance model's spectrum or a tabulated spectrum.
    Szego {
        #[arg(
            long,
            conflicts_with = "spectrum",
            required_unless_present = "spectrum"
        )]
        dist: Option<PathBuf>,
        /// CSV with header `omega,S`.
        #[arg(long)]
        spectrum: Option<PathBuf>,
        /// Negentropy rate (bits) to subtract for a tabulated spectrum.
        #[arg(long, default_value_t = 0.0)]
        negentropy: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(outcome) => ExitCode::from(outcome.code()),
        Err(e) => {
            eprintln!("fundlim: {e}");
            ExitCode::from(e.code())
        }
    }
}
