//! `soa gen` — generate the benchmark suite: rendered documents, spec files
//! and ground-truth files, one directory per schedule.

use std::fs;

use anyhow::{bail, Context, Result};

use soa_core::schedule::Complexity;
use soa_core::synth::{generate_suite, write_suite};

use crate::config::PipelineConfig;

pub fn run(
    config: &PipelineConfig,
    force: bool,
    seed: Option<u64>,
    count: Option<usize>,
) -> Result<()> {
    let mut suite_config = config.suite_config();
    if let Some(seed) = seed {
        suite_config.seed = seed;
    }
    if let Some(count) = count {
        // Scale the complexity split to the requested total; the generator
        // validates the result against the benchmark's fixed composition.
        suite_config.simple = count / 4;
        suite_config.complex = count / 4;
        suite_config.moderate = count - 2 * (count / 4);
    }

    let dir = &config.suite.dir;
    if dir.is_dir()
        && fs::read_dir(dir)
            .with_context(|| format!("cannot list {}", dir.display()))?
            .next()
            .is_some()
    {
        if !force {
            bail!(
                "suite directory {} is not empty; pass --force to regenerate it",
                dir.display()
            );
        }
        fs::remove_dir_all(dir)
            .with_context(|| format!("cannot clear {}", dir.display()))?;
    }

    let specs = generate_suite(&suite_config)?;
    let summary = write_suite(dir, &specs)?;

    let per = |c: Complexity| summary.by_complexity.get(&c).copied().unwrap_or(0);
    println!("suite written to {}", dir.display());
    println!(
        "schedules:   {} ({} simple / {} moderate / {} complex)",
        summary.schedules,
        per(Complexity::Simple),
        per(Complexity::Moderate),
        per(Complexity::Complex),
    );
    println!("arms:        {}", summary.arms);
    println!("comparisons: {}", summary.comparisons);
    Ok(())
}
