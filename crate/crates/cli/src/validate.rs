//! Matches consensus slots to ground-truth arms and builds per-window
//! validation records.
//!
//! Truth arms and consensus slots are never matched by name: within each
//! (protocol, intervention type) group, truth arms are ranked by their
//! 12-month contact days — the same order consensus positions encode — and
//! joined rank to rank.

use std::collections::BTreeMap;

use anyhow::{bail, Result};

use soa_core::consensus::ConsensusArm;
use soa_core::evaluate::ValidationRecord;
use soa_core::schedule::{ArmRole, TimeWindow};
use soa_core::synth::LoadedSchedule;

/// One truth arm reduced to what matching and scoring need.
struct TruthSlot {
    arm_id: String,
    windows: BTreeMap<TimeWindow, u32>,
}

/// Builds one validation record per (consensus slot, window) pair.
///
/// `primary_slots_only` keeps only position 0 of every (protocol, type)
/// group, the "one arm per type per protocol" view some downstream analyses
/// want; all slots are scored otherwise.
pub fn build_validation(
    schedules: &[LoadedSchedule],
    consensus: &[ConsensusArm],
    primary_slots_only: bool,
) -> Result<Vec<ValidationRecord>> {
    let by_id: BTreeMap<&str, &LoadedSchedule> =
        schedules.iter().map(|s| (s.spec.schedule_id.as_str(), s)).collect();

    // (protocol, role) -> truth arms sorted by m12 then arm_id.
    let mut truth_groups: BTreeMap<(&str, ArmRole), Vec<TruthSlot>> = BTreeMap::new();
    for schedule in schedules {
        for (arm_id, record) in &schedule.truth.arms {
            let windows: BTreeMap<TimeWindow, u32> = TimeWindow::ALL
                .into_iter()
                .map(|w| (w, record.windows[&w].contact_days))
                .collect();
            truth_groups
                .entry((schedule.spec.schedule_id.as_str(), record.role))
                .or_default()
                .push(TruthSlot { arm_id: arm_id.clone(), windows });
        }
    }
    for group in truth_groups.values_mut() {
        group.sort_by(|a, b| {
            a.windows[&TimeWindow::Month12]
                .cmp(&b.windows[&TimeWindow::Month12])
                .then(a.arm_id.cmp(&b.arm_id))
        });
    }

    let mut records = Vec::new();
    for slot in consensus {
        if primary_slots_only && slot.pos_idx != 0 {
            continue;
        }
        let Some(schedule) = by_id.get(slot.protocol_id.as_str()) else {
            bail!(
                "consensus references protocol {:?} that is not in the suite directory",
                slot.protocol_id
            );
        };
        let group = truth_groups
            .get(&(slot.protocol_id.as_str(), slot.intervention_type))
            .map(Vec::as_slice)
            .unwrap_or_default();
        let Some(truth_arm) = group.get(slot.pos_idx) else {
            log::warn!(
                "{} {} position {} has no ground-truth counterpart; skipping",
                slot.protocol_id,
                slot.intervention_type.label(),
                slot.pos_idx
            );
            continue;
        };
        for window in TimeWindow::ALL {
            records.push(ValidationRecord::new(
                &slot.protocol_id,
                &truth_arm.arm_id,
                window,
                slot.rounded(window),
                truth_arm.windows[&window] as i64,
                schedule.spec.complexity,
            ));
        }
    }

    if records.is_empty() {
        bail!("no validation records: consensus and ground truth share no arms");
    }
    Ok(records)
}

/// Per-comparison plot data: signed error with its window and complexity,
/// enough to recreate the error-distribution figures in any plotting tool.
pub fn plot_data_csv(records: &[ValidationRecord]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["window", "complexity", "signed_error", "abs_error", "schedule_id", "arm_id"])
        .expect("in-memory write");
    for r in records {
        writer
            .write_record([
                r.window.label(),
                r.complexity.label(),
                &r.signed_error.to_string(),
                &r.signed_error.abs().to_string(),
                r.schedule_id.as_str(),
                r.arm_id.as_str(),
            ])
            .expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;
    use soa_core::consensus::compute_consensus;
    use soa_core::extract::{extract, Architecture, BackendConfig, ExtractRequest, OracleBackend};
    use soa_core::synth::{generate_suite, render_schedule, truth_from_spec, SuiteConfig};
    use std::path::PathBuf;

    fn in_memory_suite() -> (Vec<LoadedSchedule>, Vec<soa_core::extract::RunResult>) {
        let specs = generate_suite(&SuiteConfig::default()).unwrap();
        let backend = OracleBackend::from_specs(specs.clone());
        let config = BackendConfig { backoff_base_ms: 0, ..BackendConfig::default() };

        let mut schedules = Vec::new();
        let mut runs = Vec::new();
        for spec in specs {
            let document = render_schedule(&spec).unwrap().document;
            for run_index in 1..=3 {
                let outcome = extract(
                    &backend,
                    &config,
                    &ExtractRequest {
                        document: &document,
                        protocol_id: &spec.schedule_id,
                        run_index,
                        architecture: Architecture::Vanilla,
                    },
                )
                .unwrap();
                runs.push(outcome.result);
            }
            let truth = truth_from_spec(&spec).unwrap();
            schedules.push(LoadedSchedule { spec, truth, dir: PathBuf::new() });
        }
        (schedules, runs)
    }

    #[test]
    fn oracle_consensus_validates_perfectly() {
        let (schedules, runs) = in_memory_suite();
        let consensus = compute_consensus(&runs);
        let records = build_validation(&schedules, &consensus, false).unwrap();
        assert_eq!(records.len(), 240);
        assert!(records.iter().all(|r| r.signed_error == 0));
    }

    #[test]
    fn primary_slot_filter_keeps_position_zero_only() {
        let (schedules, runs) = in_memory_suite();
        let consensus = compute_consensus(&runs);
        let filtered = build_validation(&schedules, &consensus, true).unwrap();
        // This suite has exactly one arm per (protocol, type), so the filter
        // changes nothing; it exists for experiments with deeper groups.
        assert_eq!(filtered.len(), 240);
    }

    #[test]
    fn unknown_protocols_are_loud() {
        let (schedules, runs) = in_memory_suite();
        let mut consensus = compute_consensus(&runs);
        consensus[0].protocol_id = "GHOST-2025-99".to_string();
        let err = build_validation(&schedules, &consensus, false).unwrap_err().to_string();
        assert!(err.contains("GHOST-2025-99"), "{err}");
    }

    #[test]
    fn plot_data_has_one_row_per_record() {
        let (schedules, runs) = in_memory_suite();
        let records =
            build_validation(&schedules, &compute_consensus(&runs), false).unwrap();
        let csv = plot_data_csv(&records);
        assert_eq!(csv.lines().count(), 241);
        assert!(csv.starts_with("window,complexity,signed_error,abs_error"));
    }
}
