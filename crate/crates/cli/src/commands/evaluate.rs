//! `soa evaluate` — score an experiment's consensus against the suite's
//! ground truth: headline accuracy, per-window error distribution and the
//! per-comparison validation table.

use anyhow::{bail, Result};

use soa_core::consensus::compute_consensus;
use soa_core::evaluate::{
    accuracy_summary_text, error_distribution, error_distribution_text, validation_csv,
    ValidationRecord,
};
use soa_core::synth::load_suite;

use crate::config::PipelineConfig;
use crate::experiment::ExperimentPaths;
use crate::util::atomic_write;
use crate::validate::build_validation;

/// Writes the accuracy artifacts and returns the two text summaries;
/// shared with `soa report`.
pub fn write_artifacts(
    paths: &ExperimentPaths,
    records: &[ValidationRecord],
) -> Result<(String, String)> {
    let accuracy = accuracy_summary_text(records)?;
    let distribution = error_distribution_text(&error_distribution(records)?);
    let dir = paths.reports_dir();
    atomic_write(&dir.join("validation.csv"), validation_csv(records).as_bytes())?;
    atomic_write(&dir.join("accuracy.txt"), accuracy.as_bytes())?;
    atomic_write(&dir.join("error_distribution.txt"), distribution.as_bytes())?;
    Ok((accuracy, distribution))
}

pub fn run(config: &PipelineConfig) -> Result<()> {
    let paths = ExperimentPaths::new(&config.run.experiments_dir, &config.run.experiment);
    let runs = paths.load_runs()?;
    if runs.is_empty() {
        bail!("experiment {:?} has no completed runs", config.run.experiment);
    }
    let schedules = load_suite(&config.suite.dir)?;
    let consensus = compute_consensus(&runs);
    let records = build_validation(&schedules, &consensus, false)?;

    let (accuracy, distribution) = write_artifacts(&paths, &records)?;
    print!("{accuracy}");
    print!("{distribution}");
    println!("written to {}", paths.reports_dir().display());
    Ok(())
}
