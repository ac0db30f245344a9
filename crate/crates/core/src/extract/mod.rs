//! Extraction protocols and pluggable backends.
//!
//! A backend turns a prompt into raw model text; everything else is shared:
//! prompt construction, retry with exponential backoff, strict output
//! parsing and run-result assembly. Two protocols are supported:
//!
//! * **vanilla** — a single call that goes straight from document to counts;
//! * **two_stage** — a structure-blueprint call followed by a guided
//!   counting call that embeds the parsed blueprint.
//!
//! Three backends implement the [`Backend`] trait: a remote generative-model
//! endpoint, a deterministic oracle that answers from schedule specs, and a
//! noise-injecting wrapper around the oracle for consensus and stability
//! experiments.

mod backend;
mod parse;
mod prompt;
mod remote;

pub use backend::{OracleBackend, PerturbedBackend};
pub use parse::{normalize_intervention_type, parse_extraction_output, parse_structure_output};
pub use prompt::{
    build_count_prompt, build_structure_prompt, build_vanilla_prompt, template_hash,
    COUNT_TEMPLATE, STRUCTURE_TEMPLATE, VANILLA_TEMPLATE,
};
pub use remote::RemoteBackend;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schedule::{ContactCategory, TimeWindow};

/// Default sampling temperature for extraction calls.
pub const EXTRACTION_TEMPERATURE: f64 = 0.1;

/// Default extraction model identifier.
pub const DEFAULT_MODEL_ID: &str = "gemini-3-flash-preview";

/// Constants describing how source summary documents were produced upstream.
/// Recorded in configuration for provenance only; the pipeline never makes
/// summary calls itself.
pub mod summary_stage {
    pub const MODEL_ID: &str = "gemini-2.5-Flash-preview-04-17";
    pub const TEMPERATURE: f64 = 0.0;
    pub const TOP_P: f64 = 0.95;
}

/// Which backend implementation serves extraction calls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Remote,
    Oracle,
    Perturbed,
}

impl BackendKind {
    pub fn label(self) -> &'static str {
        match self {
            BackendKind::Remote => "remote",
            BackendKind::Oracle => "oracle",
            BackendKind::Perturbed => "perturbed",
        }
    }
}

/// Extraction protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    Vanilla,
    TwoStage,
}

impl Architecture {
    pub fn label(self) -> &'static str {
        match self {
            Architecture::Vanilla => "vanilla",
            Architecture::TwoStage => "two_stage",
        }
    }

    pub fn from_label(label: &str) -> Option<Architecture> {
        match label {
            "vanilla" => Some(Architecture::Vanilla),
            "two_stage" => Some(Architecture::TwoStage),
            _ => None,
        }
    }
}

/// Remote-endpoint settings for [`BackendKind::Remote`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteConfig {
    /// Full URL of the generation endpoint.
    pub endpoint: String,
    /// Name of the environment variable holding the API key. The key itself
    /// never appears in configuration or logs.
    #[serde(default = "default_credential_env")]
    pub credential_env: String,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
}

fn default_credential_env() -> String {
    "SOA_API_KEY".to_string()
}

fn default_timeout_ms() -> u64 {
    60_000
}

/// Noise settings for [`BackendKind::Perturbed`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerturbationConfig {
    pub seed: u64,
    /// Rewrite arm names and intervention-type strings (role-preserving).
    #[serde(default)]
    pub mangle_names: bool,
    /// Maximum absolute jitter added to each contact-day count.
    #[serde(default)]
    pub value_jitter: u32,
}

/// Backend selection plus sampling and retry settings for one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub backend_kind: BackendKind,
    #[serde(default = "default_model_id")]
    pub model_id: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_p: Option<f64>,
    /// Total call attempts per stage, including the first.
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff_base_ms")]
    pub backoff_base_ms: u64,
    /// Ask the remote endpoint for schema-constrained JSON output.
    #[serde(default)]
    pub force_structured_output: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub remote: Option<RemoteConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationConfig>,
}

fn default_model_id() -> String {
    DEFAULT_MODEL_ID.to_string()
}

fn default_temperature() -> f64 {
    EXTRACTION_TEMPERATURE
}

fn default_max_retries() -> u32 {
    3
}

fn default_backoff_base_ms() -> u64 {
    500
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            backend_kind: BackendKind::Oracle,
            model_id: default_model_id(),
            temperature: default_temperature(),
            top_p: None,
            max_retries: default_max_retries(),
            backoff_base_ms: default_backoff_base_ms(),
            force_structured_output: false,
            remote: None,
            perturbation: None,
        }
    }
}

/// Free-text context captured alongside the counts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionNotes {
    #[serde(default)]
    pub cycle_length: Option<String>,
    #[serde(default)]
    pub treatment_duration: Option<String>,
    #[serde(default)]
    pub visit_pattern: Option<String>,
    #[serde(default)]
    pub disease: Option<String>,
}

/// Extracted counts for one arm, as reported by a backend.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArmExtraction {
    /// Arm name as it appeared in the output; free text, possibly unstable
    /// across runs.
    pub arm_name: String,
    /// Intervention-type string as reported, before normalization.
    pub intervention_type_raw: String,
    pub contact_days: BTreeMap<TimeWindow, u32>,
    #[serde(default)]
    pub category_breakdown: BTreeMap<ContactCategory, i64>,
    #[serde(default)]
    pub notes: ExtractionNotes,
    /// Quality flags raised during parsing (non-monotone windows, unknown
    /// keys, missing optional sections). Never fatal.
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl ArmExtraction {
    pub fn contact_days_at(&self, window: TimeWindow) -> u32 {
        self.contact_days.get(&window).copied().unwrap_or(0)
    }
}

/// Stage-1 blueprint of a schedule's structure. Every field is optional so
/// stage 2 can see exactly which parts of the document were understood.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructureExtraction {
    #[serde(default)]
    pub cycle_length_days: Option<u32>,
    #[serde(default)]
    pub treatment_duration_months: Option<u32>,
    #[serde(default)]
    pub visit_days_per_cycle: Option<BTreeMap<String, Vec<u32>>>,
    #[serde(default)]
    pub screening_days: Option<Vec<i32>>,
    #[serde(default)]
    pub eot_offset_days: Option<u32>,
    #[serde(default)]
    pub followup_months: Option<Vec<u32>>,
    #[serde(default)]
    pub imaging_interval_days: Option<u32>,
    #[serde(default)]
    pub disease: Option<String>,
}

impl StructureExtraction {
    pub fn is_empty(&self) -> bool {
        self.missing_fields().len() == 8
    }

    /// Names of fields the blueprint could not fill.
    pub fn missing_fields(&self) -> Vec<&'static str> {
        let mut missing = Vec::new();
        if self.cycle_length_days.is_none() {
            missing.push("cycle_length_days");
        }
        if self.treatment_duration_months.is_none() {
            missing.push("treatment_duration_months");
        }
        if self.visit_days_per_cycle.is_none() {
            missing.push("visit_days_per_cycle");
        }
        if self.screening_days.is_none() {
            missing.push("screening_days");
        }
        if self.eot_offset_days.is_none() {
            missing.push("eot_offset_days");
        }
        if self.followup_months.is_none() {
            missing.push("followup_months");
        }
        if self.imaging_interval_days.is_none() {
            missing.push("imaging_interval_days");
        }
        if self.disease.is_none() {
            missing.push("disease");
        }
        missing
    }
}

/// Backend identity and provenance stored in every run result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendMeta {
    pub kind: BackendKind,
    pub model_id: String,
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_p: Option<f64>,
    /// Stage label → SHA-256 of the prompt template used.
    pub prompt_hashes: BTreeMap<String, String>,
}

/// One complete extraction run over one document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub schema_version: String,
    /// Identity of the source document (its directory or filename stem).
    pub protocol_id: String,
    pub run_index: u32,
    pub architecture: Architecture,
    pub arms: Vec<ArmExtraction>,
    pub backend: BackendMeta,
    /// Stage-1 blueprint; present for two-stage runs only.
    #[serde(default)]
    pub structure: Option<StructureExtraction>,
    pub wall_time_ms: u64,
}

/// A backend call stage, used for logging and prompt-hash bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Vanilla,
    Structure,
    Count,
}

impl Stage {
    pub fn label(self) -> &'static str {
        match self {
            Stage::Vanilla => "vanilla",
            Stage::Structure => "structure",
            Stage::Count => "count",
        }
    }
}

/// Errors a backend call can raise. Transient errors are retried;
/// fatal errors abort the run immediately.
#[derive(Debug, Error)]
pub enum BackendCallError {
    #[error("transient: {0}")]
    Transient(String),
    #[error("fatal: {0}")]
    Fatal(String),
}

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("parse error: {message}")]
    Parse {
        message: String,
        /// Raw backend text kept for audit.
        raw: String,
    },
    #[error("transport error after {attempts} attempt(s): {last_error}")]
    Transport {
        attempts: u32,
        last_error: String,
        attempt_log: Vec<String>,
    },
    #[error("backend error: {0}")]
    Backend(String),
    #[error("empty structure blueprint: stage 2 refuses to count without any structure")]
    EmptyStructure,
    #[error("missing credential: environment variable {0} is not set")]
    MissingCredential(String),
    #[error("document is empty")]
    EmptyDocument,
}

/// One request to a backend.
pub struct CallRequest<'a> {
    pub protocol_id: &'a str,
    pub run_index: u32,
    pub stage: Stage,
    pub prompt: &'a str,
}

/// Anything that can answer extraction prompts. Backends are shared across
/// worker threads, so implementations must be thread-safe.
pub trait Backend: Send + Sync {
    fn kind(&self) -> BackendKind;
    fn call(&self, request: &CallRequest<'_>) -> Result<String, BackendCallError>;
}

/// Log of one stage's call, for persistence under the experiment's run
/// directory. Prompts and responses carry no credentials by construction.
#[derive(Debug, Clone, Serialize)]
pub struct CallRecord {
    pub stage: &'static str,
    pub prompt: String,
    pub response: String,
    /// One line per attempt, e.g. `attempt 1: transient: HTTP 503`.
    pub attempt_log: Vec<String>,
}

/// A run result plus the per-stage call logs that produced it.
#[derive(Debug)]
pub struct RunOutcome {
    pub result: RunResult,
    pub calls: Vec<CallRecord>,
}

/// Inputs for one extraction run.
pub struct ExtractRequest<'a> {
    pub document: &'a str,
    pub protocol_id: &'a str,
    pub run_index: u32,
    pub architecture: Architecture,
}

/// Calls the backend for one stage, retrying transient failures with
/// exponential backoff (base, 2x, 4x, ...).
fn call_with_retry(
    backend: &dyn Backend,
    config: &BackendConfig,
    request: &ExtractRequest<'_>,
    stage: Stage,
    prompt: &str,
) -> Result<(String, Vec<String>), ExtractError> {
    let max_attempts = config.max_retries.max(1);
    let mut attempt_log = Vec::new();
    for attempt in 1..=max_attempts {
        let call = CallRequest {
            protocol_id: request.protocol_id,
            run_index: request.run_index,
            stage,
            prompt,
        };
        match backend.call(&call) {
            Ok(raw) => {
                attempt_log.push(format!("attempt {attempt}: ok"));
                return Ok((raw, attempt_log));
            }
            Err(BackendCallError::Fatal(message)) => {
                attempt_log.push(format!("attempt {attempt}: fatal: {message}"));
                return Err(ExtractError::Transport {
                    attempts: attempt,
                    last_error: message,
                    attempt_log,
                });
            }
            Err(BackendCallError::Transient(message)) => {
                attempt_log.push(format!("attempt {attempt}: transient: {message}"));
                if attempt == max_attempts {
                    return Err(ExtractError::Transport {
                        attempts: attempt,
                        last_error: message,
                        attempt_log,
                    });
                }
                let backoff = config.backoff_base_ms.saturating_mul(1 << (attempt - 1));
                log::warn!(
                    "{} {} stage {}: attempt {attempt} failed ({message}); retrying in {backoff} ms",
                    request.protocol_id,
                    request.run_index,
                    stage.label(),
                );
                std::thread::sleep(Duration::from_millis(backoff));
            }
        }
    }
    unreachable!("retry loop always returns")
}

/// Runs one extraction (vanilla or two-stage) through a backend and returns
/// the parsed result together with per-stage call logs.
pub fn extract(
    backend: &dyn Backend,
    config: &BackendConfig,
    request: &ExtractRequest<'_>,
) -> Result<RunOutcome, ExtractError> {
    let start = Instant::now();
    let mut calls = Vec::new();
    let mut prompt_hashes = BTreeMap::new();

    let (arms, structure) = match request.architecture {
        Architecture::Vanilla => {
            let prompt = build_vanilla_prompt(request.document)?;
            prompt_hashes
                .insert(Stage::Vanilla.label().to_string(), template_hash(VANILLA_TEMPLATE));
            let (raw, attempt_log) =
                call_with_retry(backend, config, request, Stage::Vanilla, &prompt)?;
            let arms = parse_extraction_output(&raw)?;
            calls.push(CallRecord {
                stage: Stage::Vanilla.label(),
                prompt,
                response: raw,
                attempt_log,
            });
            (arms, None)
        }
        Architecture::TwoStage => {
            let structure_prompt = build_structure_prompt(request.document)?;
            prompt_hashes
                .insert(Stage::Structure.label().to_string(), template_hash(STRUCTURE_TEMPLATE));
            let (raw, attempt_log) =
                call_with_retry(backend, config, request, Stage::Structure, &structure_prompt)?;
            let structure = parse_structure_output(&raw)?;
            calls.push(CallRecord {
                stage: Stage::Structure.label(),
                prompt: structure_prompt,
                response: raw,
                attempt_log,
            });

            let count_prompt = build_count_prompt(&structure, request.document)?;
            prompt_hashes
                .insert(Stage::Count.label().to_string(), template_hash(COUNT_TEMPLATE));
            let (raw, attempt_log) =
                call_with_retry(backend, config, request, Stage::Count, &count_prompt)?;
            let arms = parse_extraction_output(&raw)?;
            calls.push(CallRecord {
                stage: Stage::Count.label(),
                prompt: count_prompt,
                response: raw,
                attempt_log,
            });
            (arms, Some(structure))
        }
    };

    let result = RunResult {
        schema_version: crate::synth::SCHEMA_VERSION.to_string(),
        protocol_id: request.protocol_id.to_string(),
        run_index: request.run_index,
        architecture: request.architecture,
        arms,
        backend: BackendMeta {
            kind: backend.kind(),
            model_id: config.model_id.clone(),
            temperature: config.temperature,
            top_p: config.top_p,
            prompt_hashes,
        },
        structure,
        wall_time_ms: start.elapsed().as_millis() as u64,
    };
    Ok(RunOutcome { result, calls })
}
