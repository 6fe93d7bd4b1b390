//! Command-line front end: conserved-feature probing of malicious PDFs and
//! evasion-robust retraining of structural classifiers.

mod commands;
mod config;
mod docs;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::Overrides;
use error::CliError;

#[derive(Parser)]
#[command(
    name = "conserva",
    version,
    about = "Conserved-feature analysis and evasion-robust retraining for PDF malware classifiers"
)]
struct Cli {
    /// Configuration file (JSON); CPATH_CONFIG is the fallback
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Output directory for reports (overrides the configuration)
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Root RNG seed (overrides the configuration)
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the feature vocabularies and vectorize every corpus group
    Extract,
    /// Probe each seed against the oracle and unify its conserved features
    Conserve,
    /// Re-project the unified conserved set onto the other vocabularies
    Map,
    /// Train the baseline linear classifier
    Train,
    /// Run the configured evasion attacks against the baseline model
    Attack,
    /// Harden the classifier against each attack by iterative retraining
    Retrain,
    /// Score every model on the held-out corpus, clean and under attack
    Evaluate,
    /// Run the whole pipeline and compare baseline with retrained models
    Experiment,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let overrides = Overrides { config: cli.config, out: cli.out, seed: cli.seed };
    let cfg = config::load(&overrides)?;
    match cli.command {
        Command::Extract => commands::extract::run(&cfg).map(drop),
        Command::Conserve => commands::conserve::run(&cfg).map(drop),
        Command::Map => commands::map::run(&cfg).map(drop),
        Command::Train => commands::train::run(&cfg).map(drop),
        Command::Attack => commands::attack::run(&cfg).map(drop),
        Command::Retrain => commands::retrain::run(&cfg).map(drop),
        Command::Evaluate => commands::evaluate::run(&cfg).map(drop),
        Command::Experiment => commands::experiment::run(&cfg),
    }
}
