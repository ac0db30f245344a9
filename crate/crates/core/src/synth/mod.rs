//! Seeded generation of the synthetic benchmark suite.
//!
//! [`generate_suite`] expands a [`SuiteConfig`] into a fixed roster of
//! [`ScheduleSpec`]s: complexity counts are taken verbatim from the config,
//! disease categories, visual styles and modalities rotate round-robin by
//! generation index, and the remaining parameters (cycle length, duration,
//! visit offsets, imaging cadence) are drawn from a seeded RNG so the same
//! seed always yields the same suite, byte for byte.

mod files;
mod refparse;
mod render;

pub use files::{
    emit_ground_truth, load_suite, truth_from_spec, write_suite, LoadedSchedule, SuiteIoError,
    SuiteSummary, TruthArmRecord, TruthFile, TruthWindow, DOCUMENT_FILE, SCHEMA_VERSION,
    SPEC_FILE, TRUTH_FILE,
};
pub use refparse::{parse_rendered, ParseDocError, ParsedSchedule};
pub use render::{render_schedule, RenderedSchedule};

use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schedule::{
    ArmRole, ArmSpec, Complexity, DiseaseCategory, Modality, ScheduleSpec, SpecError,
    CYCLE_LENGTHS,
};

/// Configuration for one benchmark suite.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub seed: u64,
    pub simple: usize,
    pub moderate: usize,
    pub complex: usize,
    /// Disease sites assigned round-robin by generation index.
    pub disease_categories: Vec<DiseaseCategory>,
    /// Number of visual styles, assigned round-robin by generation index.
    pub style_count: u8,
    /// Modalities assigned round-robin by generation index.
    pub modality_mix: Vec<Modality>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            seed: 42,
            simple: 5,
            moderate: 10,
            complex: 5,
            disease_categories: DiseaseCategory::ALL.to_vec(),
            style_count: 5,
            modality_mix: vec![
                Modality::Systemic,
                Modality::Systemic,
                Modality::Systemic,
                Modality::Radiation,
                Modality::Surgery,
            ],
        }
    }
}

/// Total schedules the suite must contain.
pub const SUITE_SIZE: usize = 20;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid suite config: {0}")]
    Config(String),
    #[error(transparent)]
    Spec(#[from] SpecError),
}

impl SuiteConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let total = self.simple + self.moderate + self.complex;
        if total != SUITE_SIZE {
            return Err(SynthError::Config(format!(
                "complexity counts sum to {total}, expected {SUITE_SIZE}"
            )));
        }
        if self.disease_categories.is_empty() {
            return Err(SynthError::Config("disease_categories is empty".into()));
        }
        if self.style_count == 0 || self.style_count > 5 {
            return Err(SynthError::Config(format!(
                "style_count {} outside [1, 5]",
                self.style_count
            )));
        }
        if self.modality_mix.is_empty() {
            return Err(SynthError::Config("modality_mix is empty".into()));
        }
        Ok(())
    }
}

/// Imaging cadences (days) sampled during generation.
const IMAGING_INTERVALS: [u32; 4] = [42, 56, 63, 84];

/// Regimen names for intervention arms.
const INTERVENTION_LABELS: [&str; 12] = [
    "Pembrolizumab + Carboplatin",
    "Nivolumab + Ipilimumab",
    "Atezolizumab + Nab-Paclitaxel",
    "Durvalumab + Tremelimumab",
    "Trastuzumab Deruxtecan",
    "Sacituzumab Govitecan",
    "Olaparib + Bevacizumab",
    "Cabozantinib + Nivolumab",
    "Ramucirumab + Paclitaxel",
    "Enfortumab Vedotin + Pembrolizumab",
    "Lenvatinib + Everolimus",
    "Avelumab + Axitinib",
];

/// Regimen names for control arms.
const CONTROL_LABELS: [&str; 8] = [
    "Placebo + Carboplatin",
    "Physician's Choice Chemotherapy",
    "Standard of Care Chemotherapy",
    "Placebo",
    "Docetaxel",
    "Paclitaxel",
    "Observation + Best Supportive Care",
    "Gemcitabine + Cisplatin",
];

/// Samples `n` distinct visit-day offsets in `[1, cycle_length]`.
fn sample_offsets(
    rng: &mut ChaCha8Rng,
    n: usize,
    cycle_length: u32,
    include_day_one: bool,
) -> BTreeSet<u32> {
    let mut days = BTreeSet::new();
    if include_day_one {
        days.insert(1);
    }
    while days.len() < n {
        days.insert(rng.random_range(1..=cycle_length));
    }
    days
}

/// Generates the full suite of schedule specs for a config.
///
/// Deterministic: the same config (including seed) always produces the same
/// specs. Complexity blocks are emitted in order simple, moderate, complex.
pub fn generate_suite(config: &SuiteConfig) -> Result<Vec<ScheduleSpec>, SynthError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut plan = Vec::with_capacity(SUITE_SIZE);
    plan.extend(std::iter::repeat_n(Complexity::Simple, config.simple));
    plan.extend(std::iter::repeat_n(Complexity::Moderate, config.moderate));
    plan.extend(std::iter::repeat_n(Complexity::Complex, config.complex));

    let mut specs = Vec::with_capacity(plan.len());
    for (idx, &complexity) in plan.iter().enumerate() {
        let disease = config.disease_categories[idx % config.disease_categories.len()];
        let style_id = (idx % config.style_count as usize) as u8 + 1;
        let modality = config.modality_mix[idx % config.modality_mix.len()];

        let cycle_length = *CYCLE_LENGTHS.choose(&mut rng).expect("non-empty");
        let duration = rng.random_range(2u32..=12);
        let n_offsets = complexity.visit_days_per_cycle();
        let intervention_days = sample_offsets(&mut rng, n_offsets, cycle_length, true);
        let control_days = sample_offsets(&mut rng, n_offsets, cycle_length, false);
        let imaging = *IMAGING_INTERVALS.choose(&mut rng).expect("non-empty");
        let intervention_label = *INTERVENTION_LABELS.choose(&mut rng).expect("non-empty");
        let control_label = *CONTROL_LABELS.choose(&mut rng).expect("non-empty");

        let schedule_id = format!("{}-2025-{:02}", disease.code(), idx + 1);
        let spec = ScheduleSpec {
            schedule_id: schedule_id.clone(),
            disease_category: disease,
            complexity,
            cycle_length_days: cycle_length,
            treatment_duration_months: duration,
            arms: vec![
                ArmSpec {
                    arm_id: format!("{schedule_id}-int"),
                    role: ArmRole::Intervention,
                    visit_days_per_cycle: intervention_days,
                    label: intervention_label.to_string(),
                },
                ArmSpec {
                    arm_id: format!("{schedule_id}-ctl"),
                    role: ArmRole::Control,
                    visit_days_per_cycle: control_days,
                    label: control_label.to_string(),
                },
            ],
            screening_days: [-14, -7].into_iter().collect(),
            imaging_interval_days: imaging,
            eot_offset_days: 30,
            followup_months: vec![9, 12],
            style_id,
            modality,
        };
        spec.validate()?;
        specs.push(spec);
    }
    Ok(specs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    #[test]
    fn default_config_produces_expected_composition() {
        let specs = generate_suite(&SuiteConfig::default()).unwrap();
        assert_eq!(specs.len(), 20);

        let mut by_complexity: BTreeMap<Complexity, usize> = BTreeMap::new();
        for s in &specs {
            *by_complexity.entry(s.complexity).or_default() += 1;
        }
        assert_eq!(by_complexity[&Complexity::Simple], 5);
        assert_eq!(by_complexity[&Complexity::Moderate], 10);
        assert_eq!(by_complexity[&Complexity::Complex], 5);

        let arms: usize = specs.iter().map(|s| s.arms.len()).sum();
        assert_eq!(arms, 40);
    }

    #[test]
    fn schedule_ids_are_unique() {
        let specs = generate_suite(&SuiteConfig::default()).unwrap();
        let ids: BTreeSet<_> = specs.iter().map(|s| s.schedule_id.clone()).collect();
        assert_eq!(ids.len(), specs.len());
    }

    #[test]
    fn styles_and_diseases_rotate_round_robin() {
        let specs = generate_suite(&SuiteConfig::default()).unwrap();
        let mut styles: BTreeMap<u8, usize> = BTreeMap::new();
        for s in &specs {
            *styles.entry(s.style_id).or_default() += 1;
        }
        assert_eq!(styles.len(), 5);
        assert!(styles.values().all(|&n| n == 4));

        let diseases: BTreeSet<_> = specs.iter().map(|s| s.disease_category).collect();
        assert_eq!(diseases.len(), 8);
    }

    #[test]
    fn same_seed_is_deterministic() {
        let a = generate_suite(&SuiteConfig::default()).unwrap();
        let b = generate_suite(&SuiteConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn different_seeds_differ() {
        let a = generate_suite(&SuiteConfig::default()).unwrap();
        let b = generate_suite(&SuiteConfig { seed: 43, ..SuiteConfig::default() }).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn bad_counts_are_rejected() {
        let config = SuiteConfig { simple: 4, ..SuiteConfig::default() };
        assert!(matches!(generate_suite(&config), Err(SynthError::Config(_))));
    }

    #[test]
    fn generated_specs_validate_and_stay_in_ranges() {
        for seed in [1u64, 7, 42, 99] {
            let specs =
                generate_suite(&SuiteConfig { seed, ..SuiteConfig::default() }).unwrap();
            for s in &specs {
                s.validate().unwrap();
                assert!(CYCLE_LENGTHS.contains(&s.cycle_length_days));
                assert!((2..=12).contains(&s.treatment_duration_months));
                assert!(IMAGING_INTERVALS.contains(&s.imaging_interval_days));
                assert!(s.intervention().visit_days_per_cycle.contains(&1));
            }
        }
    }
}
