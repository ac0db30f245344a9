//! `soa report` — the full report bundle for an experiment: consensus
//! artifacts, accuracy and stability tables, plot data and one combined
//! text file.

use std::fmt::Write as _;

use anyhow::{bail, Result};

use soa_core::consensus::{analyze_swaps, compute_consensus, swap_report_text};
use soa_core::evaluate::stability_report;
use soa_core::synth::load_suite;

use crate::config::PipelineConfig;
use crate::experiment::ExperimentPaths;
use crate::util::atomic_write;
use crate::validate::{build_validation, plot_data_csv};

pub fn run(config: &PipelineConfig, primary_slots: bool) -> Result<()> {
    let paths = ExperimentPaths::new(&config.run.experiments_dir, &config.run.experiment);
    let runs = paths.load_runs()?;
    if runs.is_empty() {
        bail!("experiment {:?} has no completed runs", config.run.experiment);
    }
    let schedules = load_suite(&config.suite.dir)?;

    // Consensus artifacts always carry every slot; the primary-slot filter
    // applies only to the scored views derived from them.
    let slots = compute_consensus(&runs);
    let swaps = analyze_swaps(&runs);
    super::consensus::write_artifacts(&paths, &slots, &swaps)?;

    let records = build_validation(&schedules, &slots, primary_slots)?;
    let (accuracy, distribution) = super::evaluate::write_artifacts(&paths, &records)?;

    let stability = stability_report(&runs);
    let stability_summary = super::stability::write_artifacts(&paths, &stability)?;

    let reports = paths.reports_dir();
    atomic_write(&reports.join("plot_data.csv"), plot_data_csv(&records).as_bytes())?;

    let mut combined = String::new();
    let _ = writeln!(combined, "experiment: {}", config.run.experiment);
    let _ = writeln!(combined, "runs loaded: {}", runs.len());
    if primary_slots {
        let _ = writeln!(combined, "scored slots: first position per (protocol, type) only");
    }
    let _ = writeln!(combined, "\n== accuracy ==\n{accuracy}");
    let _ = writeln!(combined, "== error distribution ==\n{distribution}");
    let _ = writeln!(combined, "== stability ==\n{stability_summary}");
    let _ = writeln!(combined, "== consensus ==\n{}", super::consensus::summarize(&slots, &swaps));
    let _ = writeln!(combined, "\n== swap analysis ==\n{}", swap_report_text(&swaps));
    atomic_write(&reports.join("report.txt"), combined.as_bytes())?;

    print!("{combined}");
    println!("report bundle written to {}", paths.root.display());
    Ok(())
}
