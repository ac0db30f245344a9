//! Experiment manifest: the single record tying an experiment's persisted
//! runs to the configuration and prompt templates that produced them.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use crate::util::{now_rfc3339, write_json};

pub const MANIFEST_SCHEMA_VERSION: &str = "1";

/// Outcome of one (protocol, run) extraction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunStatus {
    /// `ok` or `failed`.
    pub status: String,
    pub completed_at: String,
    pub wall_time_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RunStatus {
    pub fn ok(wall_time_ms: u64) -> Self {
        RunStatus {
            status: "ok".to_string(),
            completed_at: now_rfc3339(),
            wall_time_ms,
            error: None,
        }
    }

    pub fn failed(error: String) -> Self {
        RunStatus {
            status: "failed".to_string(),
            completed_at: now_rfc3339(),
            wall_time_ms: 0,
            error: Some(error),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

/// Per-experiment ledger. Every persisted run result is referenced by
/// exactly one manifest entry; aggregation commands trust the run files and
/// treat the manifest as provenance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub schema_version: String,
    pub experiment: String,
    pub created_at: String,
    pub updated_at: String,
    /// Hash of the resolved pipeline configuration.
    pub config_sha256: String,
    pub architecture: String,
    pub backend_kind: String,
    pub model_id: String,
    pub runs_per_protocol: u32,
    /// Content hashes of the prompt templates in use, keyed by stage.
    pub prompt_hashes: BTreeMap<String, String>,
    /// protocol_id -> run index -> status.
    pub runs: BTreeMap<String, BTreeMap<u32, RunStatus>>,
}

impl ExperimentManifest {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        experiment: &str,
        config_sha256: String,
        architecture: &str,
        backend_kind: &str,
        model_id: &str,
        runs_per_protocol: u32,
        prompt_hashes: BTreeMap<String, String>,
    ) -> Self {
        let now = now_rfc3339();
        ExperimentManifest {
            schema_version: MANIFEST_SCHEMA_VERSION.to_string(),
            experiment: experiment.to_string(),
            created_at: now.clone(),
            updated_at: now,
            config_sha256,
            architecture: architecture.to_string(),
            backend_kind: backend_kind.to_string(),
            model_id: model_id.to_string(),
            runs_per_protocol,
            prompt_hashes,
            runs: BTreeMap::new(),
        }
    }

    pub fn load(path: &Path) -> Result<ExperimentManifest> {
        let raw = fs::read_to_string(path)
            .with_context(|| format!("cannot read manifest {}", path.display()))?;
        let manifest: ExperimentManifest = serde_json::from_str(&raw)
            .with_context(|| format!("cannot parse manifest {}", path.display()))?;
        if manifest.schema_version != MANIFEST_SCHEMA_VERSION {
            anyhow::bail!(
                "manifest {} has schema version {:?}, expected {:?}",
                path.display(),
                manifest.schema_version,
                MANIFEST_SCHEMA_VERSION
            );
        }
        Ok(manifest)
    }

    pub fn save(&mut self, path: &Path) -> Result<()> {
        self.updated_at = now_rfc3339();
        write_json(path, self)
    }

    pub fn record_run(&mut self, protocol_id: &str, run_index: u32, status: RunStatus) {
        self.runs.entry(protocol_id.to_string()).or_default().insert(run_index, status);
    }

    pub fn run_status(&self, protocol_id: &str, run_index: u32) -> Option<&RunStatus> {
        self.runs.get(protocol_id).and_then(|runs| runs.get(&run_index))
    }

    pub fn counts(&self) -> (usize, usize) {
        let ok = self
            .runs
            .values()
            .flat_map(|r| r.values())
            .filter(|s| s.is_ok())
            .count();
        let failed =
            self.runs.values().flat_map(|r| r.values()).filter(|s| !s.is_ok()).count();
        (ok, failed)
    }
}
