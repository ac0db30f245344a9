//! `soa truth` — recompute the ground-truth file of every schedule from its
//! spec file. Idempotent: unchanged specs re-emit byte-identical truth.

use anyhow::{bail, Result};

use soa_core::synth::{emit_ground_truth, load_suite};

use crate::config::PipelineConfig;

pub fn run(config: &PipelineConfig) -> Result<()> {
    let dir = &config.suite.dir;
    let schedules = load_suite(dir)?;
    if schedules.is_empty() {
        bail!("no schedules under {}; run `soa gen` first", dir.display());
    }

    let mut arm_records = 0;
    for schedule in &schedules {
        let truth = emit_ground_truth(&schedule.dir, &schedule.spec)?;
        arm_records += truth.arms.len();
    }
    println!(
        "re-emitted {} truth files ({} arm records) under {}",
        schedules.len(),
        arm_records,
        dir.display()
    );
    Ok(())
}
