//! Builders for run-result fixtures shared by unit tests.

use std::collections::BTreeMap;

use crate::extract::{
    Architecture, ArmExtraction, BackendKind, BackendMeta, ExtractionNotes, RunResult,
};
use crate::schedule::TimeWindow;

/// Builds an arm with window counts given as
/// `[screening, 1m, 3m, 6m, 9m, 12m]`.
pub fn arm(name: &str, intervention_type: &str, windows: [u32; 6]) -> ArmExtraction {
    let contact_days: BTreeMap<TimeWindow, u32> =
        TimeWindow::ALL.into_iter().zip(windows).collect();
    ArmExtraction {
        arm_name: name.to_string(),
        intervention_type_raw: intervention_type.to_string(),
        contact_days,
        category_breakdown: BTreeMap::new(),
        notes: ExtractionNotes::default(),
        warnings: Vec::new(),
    }
}

/// Builds a run result holding the given arms.
pub fn run_result(protocol_id: &str, run_index: u32, arms: Vec<ArmExtraction>) -> RunResult {
    RunResult {
        schema_version: crate::synth::SCHEMA_VERSION.to_string(),
        protocol_id: protocol_id.to_string(),
        run_index,
        architecture: Architecture::Vanilla,
        arms,
        backend: BackendMeta {
            kind: BackendKind::Oracle,
            model_id: "fixture".to_string(),
            temperature: 0.0,
            top_p: None,
            prompt_hashes: BTreeMap::new(),
        },
        structure: None,
        wall_time_ms: 0,
    }
}
