//! On-disk layout of one experiment:
//!
//! ```text
//! experiments/<name>/
//!   manifest.json              provenance ledger (see `manifest`)
//!   config.json                resolved configuration snapshot
//!   runs/<protocol_id>/run<k>/
//!     calls.json               per-stage prompts, responses, attempt logs
//!     result.json              parsed RunResult (written last: completion marker)
//!   consensus/                 consensus dataset + swap diagnostics
//!   reports/                   validation, distribution, stability, plot data
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use soa_core::extract::{CallRecord, RunResult};

use crate::util::write_json;

pub const RESULT_FILE: &str = "result.json";
pub const CALLS_FILE: &str = "calls.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_SNAPSHOT_FILE: &str = "config.json";

/// Path helper for one experiment directory.
#[derive(Debug, Clone)]
pub struct ExperimentPaths {
    pub root: PathBuf,
}

impl ExperimentPaths {
    pub fn new(experiments_dir: &Path, experiment: &str) -> Self {
        ExperimentPaths { root: experiments_dir.join(experiment) }
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join(MANIFEST_FILE)
    }

    pub fn config_snapshot(&self) -> PathBuf {
        self.root.join(CONFIG_SNAPSHOT_FILE)
    }

    pub fn runs_dir(&self) -> PathBuf {
        self.root.join("runs")
    }

    pub fn run_dir(&self, protocol_id: &str, run_index: u32) -> PathBuf {
        self.runs_dir().join(protocol_id).join(format!("run{run_index}"))
    }

    pub fn result_path(&self, protocol_id: &str, run_index: u32) -> PathBuf {
        self.run_dir(protocol_id, run_index).join(RESULT_FILE)
    }

    pub fn consensus_dir(&self) -> PathBuf {
        self.root.join("consensus")
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.root.join("reports")
    }

    /// Errors unless the experiment directory exists.
    pub fn require_exists(&self) -> Result<()> {
        if !self.root.is_dir() {
            bail!("experiment not found: {}", self.root.display());
        }
        Ok(())
    }

    /// Persists one completed run. The call log is written before the
    /// result so a `result.json` on disk always implies a complete pair.
    pub fn persist_run(
        &self,
        protocol_id: &str,
        run_index: u32,
        result: &RunResult,
        calls: &[CallRecord],
    ) -> Result<()> {
        let dir = self.run_dir(protocol_id, run_index);
        write_json(&dir.join(CALLS_FILE), &calls)?;
        write_json(&dir.join(RESULT_FILE), result)?;
        Ok(())
    }

    /// Loads every persisted run result, sorted by (protocol, run index).
    pub fn load_runs(&self) -> Result<Vec<RunResult>> {
        self.require_exists()?;
        let runs_dir = self.runs_dir();
        if !runs_dir.is_dir() {
            return Ok(Vec::new());
        }

        let mut protocol_dirs: Vec<PathBuf> = fs::read_dir(&runs_dir)
            .with_context(|| format!("cannot list {}", runs_dir.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_dir())
            .collect();
        protocol_dirs.sort();

        let mut results = Vec::new();
        for protocol_dir in protocol_dirs {
            let mut run_dirs: Vec<(u32, PathBuf)> = fs::read_dir(&protocol_dir)
                .with_context(|| format!("cannot list {}", protocol_dir.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter_map(|p| {
                    let index = p
                        .file_name()?
                        .to_str()?
                        .strip_prefix("run")?
                        .parse::<u32>()
                        .ok()?;
                    Some((index, p))
                })
                .collect();
            run_dirs.sort();

            for (_, run_dir) in run_dirs {
                let path = run_dir.join(RESULT_FILE);
                if !path.is_file() {
                    continue; // incomplete run: calls.json without a result
                }
                let raw = fs::read_to_string(&path)
                    .with_context(|| format!("cannot read {}", path.display()))?;
                let result: RunResult = serde_json::from_str(&raw)
                    .with_context(|| format!("cannot parse {}", path.display()))?;
                results.push(result);
            }
        }
        Ok(results)
    }
}
