//! `soa extract` — run the configured number of extractions per protocol
//! through the configured backend, persisting each run under the
//! experiment directory.
//!
//! Runs are resumable: a (protocol, run) pair whose `result.json` already
//! exists is skipped, so an interrupted experiment continues where it
//! stopped. Failures are recorded in the manifest and do not stop the rest
//! of the batch; the command exits nonzero at the end if any run failed.

use std::collections::BTreeMap;
use std::fs;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::thread;

use anyhow::{bail, Context, Result};

use soa_core::extract::{
    extract, template_hash, Architecture, BackendKind, ExtractError, ExtractRequest, RunOutcome,
    RunResult, COUNT_TEMPLATE, STRUCTURE_TEMPLATE, VANILLA_TEMPLATE,
};
use soa_core::synth::load_suite;

use crate::config::PipelineConfig;
use crate::experiment::ExperimentPaths;
use crate::manifest::{ExperimentManifest, RunStatus};
use crate::util::write_json;

/// Command-line overrides for one invocation.
#[derive(Debug, Default)]
pub struct ExtractArgs {
    pub backend: Option<String>,
    pub arch: Option<String>,
    pub runs: Option<u32>,
}

fn prompt_hashes_for(architecture: Architecture) -> BTreeMap<String, String> {
    match architecture {
        Architecture::Vanilla => {
            BTreeMap::from([("vanilla".to_string(), template_hash(VANILLA_TEMPLATE))])
        }
        Architecture::TwoStage => BTreeMap::from([
            ("structure".to_string(), template_hash(STRUCTURE_TEMPLATE)),
            ("count".to_string(), template_hash(COUNT_TEMPLATE)),
        ]),
    }
}

pub fn run(mut config: PipelineConfig, force: bool, args: &ExtractArgs) -> Result<()> {
    if let Some(kind) = &args.backend {
        config.backend.backend_kind = match kind.as_str() {
            "oracle" => BackendKind::Oracle,
            "perturbed" => BackendKind::Perturbed,
            "remote" => BackendKind::Remote,
            other => bail!("unknown backend {other:?}; expected oracle, perturbed or remote"),
        };
    }
    if let Some(arch) = &args.arch {
        config.run.architecture = arch.clone();
    }
    if let Some(runs) = args.runs {
        config.run.runs_per_protocol = runs;
    }
    config.validate()?;
    let architecture = config.architecture().expect("validated above");

    let schedules = load_suite(&config.suite.dir)?;
    if schedules.is_empty() {
        bail!(
            "suite directory {} has no schedules; run `soa gen` first",
            config.suite.dir.display()
        );
    }

    // Remote backends fail here, before any work, if the credential env
    // var is unset.
    let backend = super::build_backend(&config)?;

    let paths = ExperimentPaths::new(&config.run.experiments_dir, &config.run.experiment);
    if force && paths.root.exists() {
        fs::remove_dir_all(&paths.root)
            .with_context(|| format!("cannot clear {}", paths.root.display()))?;
    }
    fs::create_dir_all(paths.runs_dir())
        .with_context(|| format!("cannot create {}", paths.runs_dir().display()))?;

    let config_hash = config.sha256();
    let mut manifest = if paths.manifest().is_file() {
        let existing = ExperimentManifest::load(&paths.manifest())?;
        if existing.config_sha256 != config_hash {
            bail!(
                "experiment {:?} was produced with a different configuration; \
                 pass --force to restart it or pick another --experiment name",
                config.run.experiment
            );
        }
        existing
    } else {
        ExperimentManifest::new(
            &config.run.experiment,
            config_hash,
            architecture.label(),
            config.backend.backend_kind.label(),
            &config.backend.model_id,
            config.run.runs_per_protocol,
            prompt_hashes_for(architecture),
        )
    };
    write_json(&paths.config_snapshot(), &config)?;

    // Work out what is missing, adopting any run files that exist without
    // a manifest entry (for example after a lost manifest) so every
    // persisted result stays referenced.
    let mut skipped = 0usize;
    let mut work: Vec<(usize, Vec<u32>)> = Vec::new();
    for (idx, schedule) in schedules.iter().enumerate() {
        let id = &schedule.spec.schedule_id;
        let mut missing = Vec::new();
        for run_index in 1..=config.run.runs_per_protocol {
            let result_path = paths.result_path(id, run_index);
            if result_path.is_file() {
                skipped += 1;
                // A result on disk outranks a missing or stale-failed entry.
                if manifest.run_status(id, run_index).is_none_or(|s| !s.is_ok()) {
                    let raw = fs::read_to_string(&result_path)
                        .with_context(|| format!("cannot read {}", result_path.display()))?;
                    let result: RunResult = serde_json::from_str(&raw)
                        .with_context(|| format!("cannot parse {}", result_path.display()))?;
                    manifest.record_run(id, run_index, RunStatus::ok(result.wall_time_ms));
                }
            } else {
                missing.push(run_index);
            }
        }
        if !missing.is_empty() {
            work.push((idx, missing));
        }
    }
    manifest.save(&paths.manifest())?;

    let mut completed = 0usize;
    let mut failed = 0usize;
    let next = AtomicUsize::new(0);
    let workers = config.run.concurrency.min(work.len());
    let (tx, rx) = mpsc::channel::<(String, u32, Result<RunOutcome, ExtractError>)>();

    thread::scope(|scope| -> Result<()> {
        for _ in 0..workers {
            let tx = tx.clone();
            let work = &work;
            let next = &next;
            let schedules = &schedules;
            let backend = backend.as_ref();
            let backend_config = &config.backend;
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some((idx, run_indices)) = work.get(i) else { break };
                let schedule = &schedules[*idx];
                let protocol_id = schedule.spec.schedule_id.clone();
                let document = match fs::read_to_string(schedule.document_path()) {
                    Ok(document) => document,
                    Err(error) => {
                        let message = format!("cannot read document: {error}");
                        for &run_index in run_indices {
                            let _ = tx.send((
                                protocol_id.clone(),
                                run_index,
                                Err(ExtractError::Backend(message.clone())),
                            ));
                        }
                        continue;
                    }
                };
                for &run_index in run_indices {
                    let outcome = extract(
                        backend,
                        backend_config,
                        &ExtractRequest {
                            document: &document,
                            protocol_id: &protocol_id,
                            run_index,
                            architecture,
                        },
                    );
                    let _ = tx.send((protocol_id.clone(), run_index, outcome));
                }
            });
        }
        drop(tx);

        // Single writer: workers only extract; all persistence and manifest
        // updates happen here, in completion order.
        for (protocol_id, run_index, outcome) in rx {
            match outcome {
                Ok(outcome) => {
                    paths.persist_run(&protocol_id, run_index, &outcome.result, &outcome.calls)?;
                    manifest.record_run(
                        &protocol_id,
                        run_index,
                        RunStatus::ok(outcome.result.wall_time_ms),
                    );
                    completed += 1;
                    log::info!(
                        "{protocol_id} run {run_index}: ok ({} ms)",
                        outcome.result.wall_time_ms
                    );
                }
                Err(error) => {
                    manifest.record_run(&protocol_id, run_index, RunStatus::failed(error.to_string()));
                    failed += 1;
                    log::error!("{protocol_id} run {run_index}: {error}");
                }
            }
            manifest.save(&paths.manifest())?;
        }
        Ok(())
    })?;

    println!("experiment:   {}", config.run.experiment);
    println!("architecture: {}", architecture.label());
    println!("backend:      {}", config.backend.backend_kind.label());
    println!("completed:    {completed}");
    println!("skipped:      {skipped} (already present)");
    println!("failed:       {failed}");
    let (ok_total, failed_total) = manifest.counts();
    println!("manifest:     {ok_total} ok / {failed_total} failed runs recorded");
    if failed > 0 {
        bail!("{failed} runs failed; rerun `soa extract` to retry them");
    }
    Ok(())
}
