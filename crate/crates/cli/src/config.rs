//! Pipeline configuration: one TOML file describing the suite, the backend
//! and the run parameters.
//!
//! Every field has a default, so `soa` works with no config file at all; a
//! partial file overrides only what it mentions. Credentials are never part
//! of the configuration — remote backends read the API key from the
//! environment variable named by `backend.remote.credential_env`.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use soa_core::extract::{Architecture, BackendConfig, BackendKind, PerturbationConfig};
use soa_core::synth::SuiteConfig;

/// File consulted when `--config` is not given.
pub const DEFAULT_CONFIG_FILE: &str = "soa.toml";

/// Root configuration for every subcommand.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub suite: SuiteSection,
    pub backend: BackendConfig,
    pub run: RunSection,
}

/// Suite generation parameters and location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteSection {
    pub seed: u64,
    pub simple: usize,
    pub moderate: usize,
    pub complex: usize,
    /// Directory holding one subdirectory per schedule.
    pub dir: PathBuf,
}

impl Default for SuiteSection {
    fn default() -> Self {
        let base = SuiteConfig::default();
        SuiteSection {
            seed: base.seed,
            simple: base.simple,
            moderate: base.moderate,
            complex: base.complex,
            dir: PathBuf::from("suite"),
        }
    }
}

/// Experiment identity and execution parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub experiment: String,
    /// `vanilla` or `two_stage`.
    pub architecture: String,
    pub runs_per_protocol: u32,
    /// Maximum protocols extracted concurrently.
    pub concurrency: usize,
    /// Directory holding one subdirectory per experiment.
    pub experiments_dir: PathBuf,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            experiment: "default".to_string(),
            architecture: Architecture::Vanilla.label().to_string(),
            runs_per_protocol: 3,
            concurrency: 4,
            experiments_dir: PathBuf::from("experiments"),
        }
    }
}

impl PipelineConfig {
    /// Loads the config file, or falls back to defaults when no `--config`
    /// was given and the default file does not exist.
    pub fn load(explicit: Option<&Path>) -> Result<PipelineConfig> {
        let path = match explicit {
            Some(path) => path.to_path_buf(),
            None => {
                let default = PathBuf::from(DEFAULT_CONFIG_FILE);
                if !default.exists() {
                    let config = PipelineConfig::default();
                    config.validate()?;
                    return Ok(config);
                }
                default
            }
        };
        let raw = fs::read_to_string(&path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        let config: PipelineConfig = toml::from_str(&raw)
            .with_context(|| format!("cannot parse config file {}", path.display()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.run.runs_per_protocol < 1 {
            bail!("run.runs_per_protocol must be >= 1");
        }
        if self.run.concurrency < 1 {
            bail!("run.concurrency must be >= 1");
        }
        if self.run.experiment.is_empty()
            || self.run.experiment.contains(['/', '\\'])
            || self.run.experiment.starts_with('.')
        {
            bail!("run.experiment {:?} is not a plain directory name", self.run.experiment);
        }
        if self.architecture().is_none() {
            bail!(
                "run.architecture {:?} is not one of: vanilla, two_stage",
                self.run.architecture
            );
        }
        if self.backend.backend_kind == BackendKind::Remote && self.backend.remote.is_none() {
            bail!("backend.backend_kind = \"remote\" requires a [backend.remote] section");
        }
        Ok(())
    }

    pub fn architecture(&self) -> Option<Architecture> {
        Architecture::from_label(&self.run.architecture)
    }

    /// Suite generator settings; distribution knobs beyond the seed and
    /// complexity counts keep their library defaults.
    pub fn suite_config(&self) -> SuiteConfig {
        SuiteConfig {
            seed: self.suite.seed,
            simple: self.suite.simple,
            moderate: self.suite.moderate,
            complex: self.suite.complex,
            ..SuiteConfig::default()
        }
    }

    /// Perturbation settings, defaulting to pure name noise so the mock
    /// exercises position matching without moving any value.
    pub fn perturbation(&self) -> PerturbationConfig {
        self.backend.perturbation.unwrap_or(PerturbationConfig {
            seed: 7,
            mangle_names: true,
            value_jitter: 0,
        })
    }

    /// Hash of the resolved configuration, recorded in the experiment
    /// manifest so mixed-config run directories are detected.
    pub fn sha256(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&canonical))
    }
}
