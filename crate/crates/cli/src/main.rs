//! `soa` — generate schedule-of-assessments benchmarks, run extraction
//! experiments against them, and score accuracy and reproducibility.

mod commands;
mod config;
mod experiment;
mod manifest;
mod util;
mod validate;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use crate::commands::extract::ExtractArgs;
use crate::config::PipelineConfig;

#[derive(Parser)]
#[command(
    name = "soa",
    version,
    about = "Synthetic schedule-of-assessments benchmark and extraction pipeline"
)]
struct Cli {
    /// Pipeline configuration file (default: ./soa.toml if present).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Experiment name, overriding the configuration.
    #[arg(long, global = true, value_name = "NAME")]
    experiment: Option<String>,

    /// Overwrite existing outputs instead of refusing or resuming.
    #[arg(long, global = true)]
    force: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the benchmark suite (documents, specs, ground truth).
    Gen {
        /// Generator seed, overriding the configuration.
        #[arg(long)]
        seed: Option<u64>,
        /// Total schedule count, overriding the configured complexity split.
        #[arg(long)]
        count: Option<usize>,
    },
    /// Recompute ground-truth files from the suite's spec files.
    Truth,
    /// Run extractions over the suite through the configured backend.
    Extract {
        /// Backend kind: oracle, perturbed or remote.
        #[arg(long)]
        backend: Option<String>,
        /// Extraction architecture: vanilla or two_stage.
        #[arg(long)]
        arch: Option<String>,
        /// Runs per protocol.
        #[arg(long)]
        runs: Option<u32>,
    },
    /// Aggregate an experiment's runs into the consensus dataset.
    Consensus,
    /// Score the consensus against ground truth.
    Evaluate,
    /// Classify run-to-run stability of 12-month counts.
    Stability,
    /// Write the combined report bundle (tables, text and plot data).
    Report {
        /// Score only the first position of each (protocol, type) group.
        #[arg(long)]
        primary_slots: bool,
    },
    /// Run the built-in regression gates.
    Selfcheck,
}

fn run(cli: Cli) -> Result<()> {
    let mut config = PipelineConfig::load(cli.config.as_deref())?;
    if let Some(experiment) = cli.experiment {
        config.run.experiment = experiment;
        config.validate()?;
    }

    match cli.command {
        Command::Gen { seed, count } => commands::gen::run(&config, cli.force, seed, count),
        Command::Truth => commands::truth::run(&config),
        Command::Extract { backend, arch, runs } => {
            commands::extract::run(config, cli.force, &ExtractArgs { backend, arch, runs })
        }
        Command::Consensus => commands::consensus::run(&config),
        Command::Evaluate => commands::evaluate::run(&config),
        Command::Stability => commands::stability::run(&config),
        Command::Report { primary_slots } => commands::report::run(&config, primary_slots),
        Command::Selfcheck => commands::selfcheck::run(),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();

    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error:#}");
            ExitCode::FAILURE
        }
    }
}
