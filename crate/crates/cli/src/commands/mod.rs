//! One module per subcommand, plus backend construction shared by the
//! commands that run extractions.

pub mod consensus;
pub mod evaluate;
pub mod extract;
pub mod gen;
pub mod report;
pub mod selfcheck;
pub mod stability;
pub mod truth;

use anyhow::Result;

use soa_core::extract::{Backend, BackendKind, OracleBackend, PerturbedBackend, RemoteBackend};

use crate::config::PipelineConfig;

/// Builds the configured backend. Deterministic backends read the suite's
/// spec files for their answers; the remote backend performs its credential
/// preflight here, so a missing key fails before any work is scheduled.
pub fn build_backend(config: &PipelineConfig) -> Result<Box<dyn Backend>> {
    let backend: Box<dyn Backend> = match config.backend.backend_kind {
        BackendKind::Oracle => Box::new(OracleBackend::from_suite_dir(&config.suite.dir)?),
        BackendKind::Perturbed => Box::new(PerturbedBackend::new(
            OracleBackend::from_suite_dir(&config.suite.dir)?,
            config.perturbation(),
        )),
        BackendKind::Remote => Box::new(RemoteBackend::new(&config.backend)?),
    };
    Ok(backend)
}
