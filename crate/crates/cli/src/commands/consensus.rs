//! `soa consensus` — aggregate an experiment's runs into the consensus
//! dataset plus swap diagnostics.

use std::path::PathBuf;

use anyhow::Result;

use soa_core::consensus::{
    analyze_swaps, compute_consensus, consensus_csv, swap_report_text, ConsensusArm, SwapReport,
};
use soa_core::extract::RunResult;

use crate::config::PipelineConfig;
use crate::experiment::ExperimentPaths;
use crate::util::{atomic_write, write_json};

/// Writes the consensus artifacts; shared with `soa report`.
pub fn write_artifacts(
    paths: &ExperimentPaths,
    slots: &[ConsensusArm],
    swaps: &SwapReport,
) -> Result<PathBuf> {
    let dir = paths.consensus_dir();
    atomic_write(&dir.join("consensus.csv"), consensus_csv(slots).as_bytes())?;
    write_json(&dir.join("consensus.json"), &slots)?;
    write_json(&dir.join("swaps.json"), swaps)?;
    atomic_write(&dir.join("swaps.txt"), swap_report_text(swaps).as_bytes())?;
    Ok(dir)
}

pub fn summarize(slots: &[ConsensusArm], swaps: &SwapReport) -> String {
    let partial = slots.iter().filter(|s| s.flagged_partial).count();
    format!(
        "consensus slots: {} ({} flagged partial)\n\
         multi-arm groups: {} ({} with potential swaps, {} close pairs)",
        slots.len(),
        partial,
        swaps.multi_arm_groups,
        swaps.groups_with_potential_swaps,
        swaps.adjacent_close_pairs,
    )
}

pub fn run(config: &PipelineConfig) -> Result<()> {
    let paths = ExperimentPaths::new(&config.run.experiments_dir, &config.run.experiment);
    let runs: Vec<RunResult> = paths.load_runs()?;
    if runs.is_empty() {
        log::warn!(
            "experiment {:?} has no completed runs; writing an empty consensus",
            config.run.experiment
        );
    }

    let slots = compute_consensus(&runs);
    let swaps = analyze_swaps(&runs);
    let dir = write_artifacts(&paths, &slots, &swaps)?;

    println!("{}", summarize(&slots, &swaps));
    println!("written to {}", dir.display());
    Ok(())
}
