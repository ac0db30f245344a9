//! `soa stability` — classify run-to-run reproducibility of every
//! (protocol, type, position) slot from its 12-month counts.

use anyhow::{bail, Result};

use soa_core::evaluate::{stability_csv, stability_report, stability_text, StabilityReport};

use crate::config::PipelineConfig;
use crate::experiment::ExperimentPaths;
use crate::util::atomic_write;

/// Writes the stability artifacts and returns the text summary; shared
/// with `soa report`.
pub fn write_artifacts(paths: &ExperimentPaths, report: &StabilityReport) -> Result<String> {
    let text = stability_text(report);
    let dir = paths.reports_dir();
    atomic_write(&dir.join("stability.csv"), stability_csv(report).as_bytes())?;
    atomic_write(&dir.join("stability.txt"), text.as_bytes())?;
    Ok(text)
}

pub fn run(config: &PipelineConfig) -> Result<()> {
    let paths = ExperimentPaths::new(&config.run.experiments_dir, &config.run.experiment);
    let runs = paths.load_runs()?;
    if runs.is_empty() {
        bail!("experiment {:?} has no completed runs", config.run.experiment);
    }

    let report = stability_report(&runs);
    let text = write_artifacts(&paths, &report)?;
    print!("{text}");
    println!("written to {}", paths.reports_dir().display());
    Ok(())
}
