//! Command-line entry point; the work lives in the library crate.

use std::path::PathBuf;
use std::process;

use clap::{Parser, Subcommand};

use lindqed_cli::commands;

#[derive(Parser)]
#[command(
    name = "lindqed",
    about = "Open-system dynamics of spin and matter models coupled to a photon field"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compute the transition-rate matrix and write it as CSV and JSON.
    Rates {
        /// Path to a JSON run configuration.
        #[arg(long)]
        config: PathBuf,
    },
    /// Propagate the full field-coupled system and its rate-equation
    /// reduction on a shared time grid, writing a population table.
    Evolve {
        /// Path to a JSON run configuration.
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the configured validation suite and write a machine-readable
    /// report; exits nonzero when a check misses its threshold.
    Validate {
        /// Path to a JSON run configuration.
        #[arg(long)]
        config: PathBuf,
        /// Parse and echo the configuration without computing anything.
        #[arg(long)]
        dry_run: bool,
    },
}

fn main() {
    let cli = Cli::parse();
    let code = match cli.cmd {
        Cmd::Rates { config } => commands::cmd_rates(&config),
        Cmd::Evolve { config } => commands::cmd_evolve(&config),
        Cmd::Validate { config, dry_run } => commands::cmd_validate(&config, dry_run),
    };
    process::exit(code);
}
