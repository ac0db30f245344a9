//! Deterministic backends: the oracle and its noise-injecting wrapper.
//!
//! The oracle answers every prompt with a perfect payload computed from the
//! schedule spec it holds for the requested protocol. Its output flows
//! through the same parser as remote output, which keeps the pipeline
//! honest: the oracle proves the harness itself is lossless, so any error
//! measured with a remote backend is attributable to the model.
//!
//! The perturbed backend wraps the oracle and injects controlled noise —
//! role-preserving name mangling and bounded value jitter — deterministically
//! per (seed, protocol, run, stage), for consensus and stability tests.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use super::{Backend, BackendCallError, BackendKind, CallRequest, PerturbationConfig, Stage};
use crate::schedule::{
    count_contact_days, expand_arm_calendar, ArmRole, ScheduleSpec, TimeWindow,
};
use crate::synth::{load_suite, SuiteIoError};

/// Backend that answers from ground-truth schedule specs.
pub struct OracleBackend {
    specs: BTreeMap<String, ScheduleSpec>,
}

impl OracleBackend {
    /// Builds an oracle over specs, keyed by schedule id (the protocol id).
    pub fn from_specs(specs: impl IntoIterator<Item = ScheduleSpec>) -> Self {
        OracleBackend {
            specs: specs.into_iter().map(|s| (s.schedule_id.clone(), s)).collect(),
        }
    }

    /// Builds an oracle from a suite directory on disk.
    pub fn from_suite_dir(root: &Path) -> Result<Self, SuiteIoError> {
        Ok(Self::from_specs(load_suite(root)?.into_iter().map(|s| s.spec)))
    }

    fn spec(&self, protocol_id: &str) -> Result<&ScheduleSpec, BackendCallError> {
        self.specs.get(protocol_id).ok_or_else(|| {
            BackendCallError::Fatal(format!("oracle holds no spec for protocol {protocol_id}"))
        })
    }

    fn counting_payload(spec: &ScheduleSpec) -> Result<String, BackendCallError> {
        let mut arms = Vec::new();
        for arm in &spec.arms {
            let calendar = expand_arm_calendar(spec, arm)
                .map_err(|e| BackendCallError::Fatal(e.to_string()))?;
            let truth = count_contact_days(&calendar);

            let mut contact_days = Map::new();
            for window in TimeWindow::ALL {
                contact_days
                    .insert(window.label().to_string(), json!(truth.count(window)));
            }
            let mut categories = Map::new();
            for (category, count) in &truth.category_counts[&TimeWindow::Month12] {
                categories.insert(category.label().to_string(), json!(count));
            }

            let visit_pattern = arm
                .visit_days_per_cycle
                .iter()
                .map(|d| format!("D{d}"))
                .collect::<Vec<_>>()
                .join(", ");
            arms.push(json!({
                "arm_name": arm.label,
                "intervention_type": arm.role.label(),
                "contact_days": Value::Object(contact_days),
                "category_breakdown": Value::Object(categories),
                "notes": {
                    "cycle_length": format!("{} days", spec.cycle_length_days),
                    "treatment_duration": format!("{} months", spec.treatment_duration_months),
                    "visit_pattern": format!("{visit_pattern} of each cycle"),
                    "disease": spec.disease_category.display_name(),
                },
            }));
        }
        Ok(serde_json::to_string_pretty(&json!({ "arms": arms })).expect("serializable"))
    }

    fn structure_payload(spec: &ScheduleSpec) -> String {
        let visit_days: Map<String, Value> = spec
            .arms
            .iter()
            .map(|arm| {
                (
                    arm.label.clone(),
                    json!(arm.visit_days_per_cycle.iter().collect::<Vec<_>>()),
                )
            })
            .collect();
        serde_json::to_string_pretty(&json!({
            "cycle_length_days": spec.cycle_length_days,
            "treatment_duration_months": spec.treatment_duration_months,
            "visit_days_per_cycle": Value::Object(visit_days),
            "screening_days": spec.screening_days.iter().collect::<Vec<_>>(),
            "eot_offset_days": spec.eot_offset_days,
            "followup_months": spec.followup_months,
            "imaging_interval_days": spec.imaging_interval_days,
            "disease": spec.disease_category.display_name(),
        }))
        .expect("serializable")
    }
}

impl Backend for OracleBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Oracle
    }

    fn call(&self, request: &CallRequest<'_>) -> Result<String, BackendCallError> {
        let spec = self.spec(request.protocol_id)?;
        match request.stage {
            Stage::Structure => Ok(Self::structure_payload(spec)),
            Stage::Vanilla | Stage::Count => Self::counting_payload(spec),
        }
    }
}

/// Oracle wrapper that injects deterministic, bounded noise.
pub struct PerturbedBackend {
    oracle: OracleBackend,
    config: PerturbationConfig,
}

const INTERVENTION_SYNONYMS: [&str; 4] =
    ["intervention", "experimental", "treatment", "active_comparator"];
const CONTROL_SYNONYMS: [&str; 4] =
    ["control", "placebo", "standard_of_care", "comparator_placebo"];

impl PerturbedBackend {
    pub fn new(oracle: OracleBackend, config: PerturbationConfig) -> Self {
        PerturbedBackend { oracle, config }
    }

    /// Derives an independent RNG per (seed, protocol, run, stage) so runs
    /// are reproducible individually, in any order.
    fn rng_for(&self, request: &CallRequest<'_>) -> ChaCha8Rng {
        let mut hasher = Sha256::new();
        hasher.update(self.config.seed.to_le_bytes());
        hasher.update(request.protocol_id.as_bytes());
        hasher.update(request.run_index.to_le_bytes());
        hasher.update(request.stage.label().as_bytes());
        let digest = hasher.finalize();
        ChaCha8Rng::seed_from_u64(u64::from_le_bytes(digest[..8].try_into().expect("8 bytes")))
    }

    fn mangle_name(rng: &mut ChaCha8Rng, name: &str) -> String {
        match rng.random_range(0..6u8) {
            0 => name.to_uppercase(),
            1 => name.to_lowercase(),
            2 => format!("Arm: {name}"),
            3 => format!("{name} arm"),
            4 => format!("{name} (randomized)"),
            _ => format!("Group {name}"),
        }
    }

    fn role_synonym(rng: &mut ChaCha8Rng, raw: &str) -> String {
        let (role, _) = super::normalize_intervention_type(raw);
        let pool = match role {
            ArmRole::Intervention => &INTERVENTION_SYNONYMS,
            ArmRole::Control => &CONTROL_SYNONYMS,
        };
        pool.choose(rng).expect("non-empty pool").to_string()
    }

    fn perturb_counting(&self, raw: &str, rng: &mut ChaCha8Rng) -> String {
        let mut value: Value = serde_json::from_str(raw).expect("oracle emits valid JSON");
        if let Some(arms) = value.get_mut("arms").and_then(Value::as_array_mut) {
            for arm in arms {
                let Some(obj) = arm.as_object_mut() else { continue };
                if self.config.mangle_names {
                    if let Some(name) = obj.get("arm_name").and_then(Value::as_str) {
                        let mangled = Self::mangle_name(rng, name);
                        obj.insert("arm_name".to_string(), json!(mangled));
                    }
                    if let Some(kind) = obj.get("intervention_type").and_then(Value::as_str) {
                        let synonym = Self::role_synonym(rng, kind);
                        obj.insert("intervention_type".to_string(), json!(synonym));
                    }
                }
                if self.config.value_jitter > 0 {
                    let jitter = self.config.value_jitter as i64;
                    if let Some(days) = obj.get_mut("contact_days").and_then(Value::as_object_mut)
                    {
                        for count in days.values_mut() {
                            let base = count.as_i64().unwrap_or(0);
                            let noisy = (base + rng.random_range(-jitter..=jitter)).max(0);
                            *count = json!(noisy);
                        }
                    }
                }
            }
        }
        serde_json::to_string_pretty(&value).expect("serializable")
    }

    fn perturb_structure(&self, raw: &str, rng: &mut ChaCha8Rng) -> String {
        if !self.config.mangle_names {
            return raw.to_string();
        }
        let mut value: Value = serde_json::from_str(raw).expect("oracle emits valid JSON");
        if let Some(visits) =
            value.get_mut("visit_days_per_cycle").and_then(Value::as_object_mut)
        {
            let renamed: Map<String, Value> = visits
                .iter()
                .map(|(name, days)| (Self::mangle_name(rng, name), days.clone()))
                .collect();
            *visits = renamed;
        }
        serde_json::to_string_pretty(&value).expect("serializable")
    }
}

impl Backend for PerturbedBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Perturbed
    }

    fn call(&self, request: &CallRequest<'_>) -> Result<String, BackendCallError> {
        let raw = self.oracle.call(request)?;
        if !self.config.mangle_names && self.config.value_jitter == 0 {
            return Ok(raw);
        }
        let mut rng = self.rng_for(request);
        Ok(match request.stage {
            Stage::Structure => self.perturb_structure(&raw, &mut rng),
            Stage::Vanilla | Stage::Count => self.perturb_counting(&raw, &mut rng),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::{
        extract, normalize_intervention_type, Architecture, BackendConfig, ExtractRequest,
    };
    use crate::synth::{generate_suite, render_schedule, truth_from_spec, SuiteConfig};

    fn suite() -> Vec<ScheduleSpec> {
        generate_suite(&SuiteConfig::default()).unwrap()
    }

    fn run(
        backend: &dyn Backend,
        spec: &ScheduleSpec,
        architecture: Architecture,
        run_index: u32,
    ) -> crate::extract::RunResult {
        let document = render_schedule(spec).unwrap().document;
        let request = ExtractRequest {
            document: &document,
            protocol_id: &spec.schedule_id,
            run_index,
            architecture,
        };
        extract(backend, &BackendConfig::default(), &request).unwrap().result
    }

    #[test]
    fn oracle_matches_ground_truth_on_the_full_suite() {
        let specs = suite();
        let oracle = OracleBackend::from_specs(specs.clone());
        for spec in &specs {
            let result = run(&oracle, spec, Architecture::Vanilla, 1);
            let truth = truth_from_spec(spec).unwrap();
            assert_eq!(result.arms.len(), 2);
            for (arm_spec, arm) in spec.arms.iter().zip(&result.arms) {
                let record = &truth.arms[&arm_spec.arm_id];
                for window in TimeWindow::ALL {
                    assert_eq!(
                        arm.contact_days_at(window),
                        record.windows[&window].contact_days,
                        "{} {} {}",
                        spec.schedule_id,
                        arm_spec.arm_id,
                        window.label()
                    );
                }
                assert!(arm.warnings.is_empty(), "{:?}", arm.warnings);
            }
        }
    }

    #[test]
    fn oracle_two_stage_returns_structure_matching_the_spec() {
        let specs = suite();
        let oracle = OracleBackend::from_specs(specs.clone());
        let spec = &specs[0];
        let result = run(&oracle, spec, Architecture::TwoStage, 1);
        let structure = result.structure.expect("two-stage records structure");
        assert_eq!(structure.cycle_length_days, Some(spec.cycle_length_days));
        assert_eq!(
            structure.treatment_duration_months,
            Some(spec.treatment_duration_months)
        );
        assert_eq!(structure.missing_fields(), Vec::<&str>::new());
        let visits = structure.visit_days_per_cycle.unwrap();
        for arm in &spec.arms {
            assert_eq!(
                visits[&arm.label],
                arm.visit_days_per_cycle.iter().copied().collect::<Vec<_>>()
            );
        }
    }

    #[test]
    fn oracle_rejects_unknown_protocols() {
        let oracle = OracleBackend::from_specs(suite());
        let request = CallRequest {
            protocol_id: "NOPE-2025-99",
            run_index: 1,
            stage: Stage::Vanilla,
            prompt: "",
        };
        assert!(matches!(oracle.call(&request), Err(BackendCallError::Fatal(_))));
    }

    #[test]
    fn zero_noise_perturbation_is_identical_to_oracle() {
        let specs = suite();
        let spec = &specs[0];
        let oracle_result = run(
            &OracleBackend::from_specs(specs.clone()),
            spec,
            Architecture::Vanilla,
            1,
        );
        let perturbed = PerturbedBackend::new(
            OracleBackend::from_specs(specs.clone()),
            PerturbationConfig { seed: 7, mangle_names: false, value_jitter: 0 },
        );
        let perturbed_result = run(&perturbed, spec, Architecture::Vanilla, 1);
        assert_eq!(oracle_result.arms, perturbed_result.arms);
    }

    #[test]
    fn name_mangling_changes_names_but_never_values() {
        let specs = suite();
        let oracle = OracleBackend::from_specs(specs.clone());
        let perturbed = PerturbedBackend::new(
            OracleBackend::from_specs(specs.clone()),
            PerturbationConfig { seed: 11, mangle_names: true, value_jitter: 0 },
        );
        let mut any_name_changed = false;
        for spec in &specs {
            for run_index in 1..=3 {
                let base = run(&oracle, spec, Architecture::Vanilla, run_index);
                let noisy = run(&perturbed, spec, Architecture::Vanilla, run_index);
                for (a, b) in base.arms.iter().zip(&noisy.arms) {
                    assert_eq!(a.contact_days, b.contact_days);
                    assert_eq!(a.category_breakdown, b.category_breakdown);
                    if a.arm_name != b.arm_name {
                        any_name_changed = true;
                    }
                    let (role_a, _) = normalize_intervention_type(&a.intervention_type_raw);
                    let (role_b, _) = normalize_intervention_type(&b.intervention_type_raw);
                    assert_eq!(role_a, role_b, "mangling must preserve roles");
                }
            }
        }
        assert!(any_name_changed);
    }

    #[test]
    fn value_jitter_is_bounded_and_deterministic() {
        let specs = suite();
        let spec = &specs[3];
        let config = PerturbationConfig { seed: 5, mangle_names: false, value_jitter: 4 };
        let perturbed =
            PerturbedBackend::new(OracleBackend::from_specs(specs.clone()), config);
        let oracle = OracleBackend::from_specs(specs.clone());

        let base = run(&oracle, spec, Architecture::Vanilla, 1);
        let noisy_a = run(&perturbed, spec, Architecture::Vanilla, 1);
        let noisy_b = run(&perturbed, spec, Architecture::Vanilla, 1);
        assert_eq!(noisy_a.arms, noisy_b.arms, "same run index: same noise");

        let other_run = run(&perturbed, spec, Architecture::Vanilla, 2);
        assert_ne!(noisy_a.arms, other_run.arms, "different run index: fresh noise");

        for (clean, noisy) in base.arms.iter().zip(&noisy_a.arms) {
            for window in TimeWindow::ALL {
                let c = clean.contact_days_at(window) as i64;
                let n = noisy.contact_days_at(window) as i64;
                assert!((c - n).abs() <= 4, "jitter exceeded bound: {c} vs {n}");
            }
        }
    }
}
