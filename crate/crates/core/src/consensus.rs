//! Position-based arm matching and median consensus across repeated runs.
//!
//! Arm names coming back from a model are not stable run to run ("Arm A",
//! "Pembrolizumab arm", "ARM A (randomized)" may all be the same arm), so
//! arms are never matched by name. Instead, within each
//! (protocol, intervention type) group of a run, arms are sorted by their
//! 12-month contact-day count and assigned a positional index; consensus
//! then aggregates the same (protocol, type, position) slot across runs by
//! taking the per-window median. Swap diagnostics quantify how often
//! adjacent positions could have traded places between runs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::Serialize;

use crate::evaluate::{iqr, median};
use crate::extract::{normalize_intervention_type, RunResult};
use crate::schedule::{ArmRole, TimeWindow};

/// Threshold (days) under which two adjacent consensus medians count as a
/// close pair.
pub const CLOSE_PAIR_DAYS: f64 = 3.0;

/// One arm of one run, after normalization and position assignment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PositionedArm {
    pub protocol_id: String,
    pub intervention_type: ArmRole,
    /// Rank within the (protocol, type, run) group, ordered by m12 count.
    pub pos_idx: usize,
    pub run_index: u32,
    pub contact_days: BTreeMap<TimeWindow, u32>,
    /// Original arm name, retained for audit only.
    pub arm_name: String,
}

impl PositionedArm {
    pub fn contact_days_at(&self, window: TimeWindow) -> u32 {
        self.contact_days.get(&window).copied().unwrap_or(0)
    }
}

/// Groups a run's arms by normalized intervention type and assigns each a
/// positional index.
///
/// Within a group, arms sort by 12-month count, breaking ties by 6-month
/// count and then arm name, so the assignment is a deterministic total
/// order. Unrecognized intervention-type strings normalize to intervention
/// with a logged warning.
pub fn assign_positions(run: &RunResult) -> Vec<PositionedArm> {
    let mut groups: BTreeMap<ArmRole, Vec<&crate::extract::ArmExtraction>> = BTreeMap::new();
    for arm in &run.arms {
        let (role, recognized) = normalize_intervention_type(&arm.intervention_type_raw);
        if !recognized {
            log::warn!(
                "{} run {}: unrecognized intervention type {:?} for arm {:?}; treating as intervention",
                run.protocol_id,
                run.run_index,
                arm.intervention_type_raw,
                arm.arm_name,
            );
        }
        groups.entry(role).or_default().push(arm);
    }

    let mut positioned = Vec::new();
    for (role, mut arms) in groups {
        arms.sort_by(|a, b| {
            a.contact_days_at(TimeWindow::Month12)
                .cmp(&b.contact_days_at(TimeWindow::Month12))
                .then(
                    a.contact_days_at(TimeWindow::Month6)
                        .cmp(&b.contact_days_at(TimeWindow::Month6)),
                )
                .then(a.arm_name.cmp(&b.arm_name))
        });
        for (pos_idx, arm) in arms.into_iter().enumerate() {
            positioned.push(PositionedArm {
                protocol_id: run.protocol_id.clone(),
                intervention_type: role,
                pos_idx,
                run_index: run.run_index,
                contact_days: arm.contact_days.clone(),
                arm_name: arm.arm_name.clone(),
            });
        }
    }
    positioned
}

/// Per-window spread of the run values behind one consensus slot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowSpread {
    pub min: u32,
    pub max: u32,
    /// Median-exclusive IQR; absent for single-value slots.
    pub iqr: Option<f64>,
}

/// Consensus values for one (protocol, intervention type, position) slot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsensusArm {
    pub protocol_id: String,
    pub intervention_type: ArmRole,
    pub pos_idx: usize,
    /// Per-window median across runs. Non-integral after an even-count
    /// median; use [`ConsensusArm::rounded`] for integer reporting.
    pub consensus: BTreeMap<TimeWindow, f64>,
    /// Runs in which this slot appeared.
    pub supporting_runs: usize,
    /// Runs of this protocol in the experiment.
    pub total_runs: usize,
    /// True when the slot was missing from at least one run.
    pub flagged_partial: bool,
    pub spread: BTreeMap<TimeWindow, WindowSpread>,
    /// The raw per-run values behind each consensus median, for audit.
    pub run_values: BTreeMap<TimeWindow, Vec<u32>>,
    /// Arm names observed across runs, for audit.
    pub arm_names: Vec<String>,
}

impl ConsensusArm {
    pub fn consensus_at(&self, window: TimeWindow) -> f64 {
        self.consensus.get(&window).copied().unwrap_or(0.0)
    }

    /// Consensus value rounded half away from zero to an integer.
    pub fn rounded(&self, window: TimeWindow) -> i64 {
        self.consensus_at(window).round() as i64
    }
}

/// Aggregates runs into per-slot consensus via per-window medians.
///
/// Slots present in only some runs are kept, with `supporting_runs` below
/// `total_runs` and `flagged_partial` set, rather than silently dropped.
/// The output is deterministic and invariant under run order.
pub fn compute_consensus(runs: &[RunResult]) -> Vec<ConsensusArm> {
    if runs.is_empty() {
        log::warn!("consensus requested over zero runs; emitting empty output");
        return Vec::new();
    }

    let mut runs_per_protocol: BTreeMap<String, BTreeSet<u32>> = BTreeMap::new();
    for run in runs {
        runs_per_protocol.entry(run.protocol_id.clone()).or_default().insert(run.run_index);
    }

    // Slot key -> positioned arms, ordered by run for determinism.
    let mut slots: BTreeMap<(String, ArmRole, usize), Vec<PositionedArm>> = BTreeMap::new();
    for run in runs {
        for positioned in assign_positions(run) {
            slots
                .entry((
                    positioned.protocol_id.clone(),
                    positioned.intervention_type,
                    positioned.pos_idx,
                ))
                .or_default()
                .push(positioned);
        }
    }

    let mut consensus_arms = Vec::new();
    for ((protocol_id, intervention_type, pos_idx), mut observations) in slots {
        observations.sort_by_key(|o| o.run_index);
        let total_runs = runs_per_protocol[&protocol_id].len();
        let supporting_runs = observations.len();

        let mut consensus = BTreeMap::new();
        let mut spread = BTreeMap::new();
        let mut run_values = BTreeMap::new();
        for window in TimeWindow::ALL {
            let values: Vec<u32> =
                observations.iter().map(|o| o.contact_days_at(window)).collect();
            let as_f64: Vec<f64> = values.iter().map(|&v| v as f64).collect();
            consensus.insert(window, median(&as_f64).expect("slot has >= 1 observation"));
            spread.insert(
                window,
                WindowSpread {
                    min: *values.iter().min().expect("nonempty"),
                    max: *values.iter().max().expect("nonempty"),
                    iqr: iqr(&as_f64),
                },
            );
            run_values.insert(window, values);
        }

        let arm_names = observations.iter().map(|o| o.arm_name.clone()).collect();
        consensus_arms.push(ConsensusArm {
            protocol_id,
            intervention_type,
            pos_idx,
            consensus,
            supporting_runs,
            total_runs,
            flagged_partial: supporting_runs < total_runs,
            spread,
            run_values,
            arm_names,
        });
    }
    consensus_arms
}

/// One adjacent position pair within a swap-analysis group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdjacentPair {
    /// Lower position index; the pair is (lower_pos, lower_pos + 1).
    pub lower_pos: usize,
    /// 12-month values across runs at the two positions.
    pub lower_values: Vec<u32>,
    pub upper_values: Vec<u32>,
    pub lower_median: f64,
    pub upper_median: f64,
    /// True when the value ranges overlap across runs, i.e. the positions
    /// could have traded places in some run.
    pub potential_swap: bool,
    /// True when the medians differ by at most [`CLOSE_PAIR_DAYS`].
    pub close_pair: bool,
}

/// Swap diagnostics for one (protocol, intervention type) group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SwapGroup {
    pub protocol_id: String,
    pub intervention_type: ArmRole,
    /// Largest per-run arm count observed for the group.
    pub arm_count: usize,
    pub pairs: Vec<AdjacentPair>,
}

/// Experiment-wide swap diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SwapReport {
    pub groups_total: usize,
    pub multi_arm_groups: usize,
    pub groups_with_potential_swaps: usize,
    pub adjacent_close_pairs: usize,
    /// Per-group details for groups with at least two arms.
    pub groups: Vec<SwapGroup>,
}

/// Checks every adjacent position pair for cross-run overlap and close
/// consensus medians. Only groups with at least two arms can have pairs.
pub fn analyze_swaps(runs: &[RunResult]) -> SwapReport {
    // (protocol, type) -> pos_idx -> m12 values across runs.
    let mut groups: BTreeMap<(String, ArmRole), BTreeMap<usize, Vec<u32>>> = BTreeMap::new();
    for run in runs {
        for positioned in assign_positions(run) {
            groups
                .entry((positioned.protocol_id.clone(), positioned.intervention_type))
                .or_default()
                .entry(positioned.pos_idx)
                .or_default()
                .push(positioned.contact_days_at(TimeWindow::Month12));
        }
    }

    let groups_total = groups.len();
    let mut multi_arm_groups = 0;
    let mut groups_with_potential_swaps = 0;
    let mut adjacent_close_pairs = 0;
    let mut group_reports = Vec::new();
    for ((protocol_id, intervention_type), positions) in groups {
        let arm_count = positions.len();
        if arm_count < 2 {
            continue;
        }
        multi_arm_groups += 1;

        let mut pairs = Vec::new();
        for lower_pos in 0..arm_count - 1 {
            let (Some(lower_values), Some(upper_values)) =
                (positions.get(&lower_pos), positions.get(&(lower_pos + 1)))
            else {
                continue;
            };
            let lower_median = median(&lower_values.iter().map(|&v| v as f64).collect::<Vec<_>>())
                .expect("nonempty position");
            let upper_median = median(&upper_values.iter().map(|&v| v as f64).collect::<Vec<_>>())
                .expect("nonempty position");
            let potential_swap = lower_values.iter().max() >= upper_values.iter().min();
            let close_pair = (lower_median - upper_median).abs() <= CLOSE_PAIR_DAYS;
            if close_pair {
                adjacent_close_pairs += 1;
            }
            pairs.push(AdjacentPair {
                lower_pos,
                lower_values: lower_values.clone(),
                upper_values: upper_values.clone(),
                lower_median,
                upper_median,
                potential_swap,
                close_pair,
            });
        }
        if pairs.iter().any(|p| p.potential_swap) {
            groups_with_potential_swaps += 1;
        }
        group_reports.push(SwapGroup { protocol_id, intervention_type, arm_count, pairs });
    }

    SwapReport {
        groups_total,
        multi_arm_groups,
        groups_with_potential_swaps,
        adjacent_close_pairs,
        groups: group_reports,
    }
}

/// Flat tabular form of the consensus dataset: one row per slot with the
/// six medians, per-window spread columns and support counts.
pub fn consensus_csv(arms: &[ConsensusArm]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header = vec![
        "protocol_id".to_string(),
        "intervention_type".to_string(),
        "pos_idx".to_string(),
        "supporting_runs".to_string(),
        "total_runs".to_string(),
        "flagged_partial".to_string(),
    ];
    for window in TimeWindow::ALL {
        header.push(window.label().to_string());
        header.push(format!("{}_min", window.label()));
        header.push(format!("{}_max", window.label()));
        header.push(format!("{}_iqr", window.label()));
    }
    writer.write_record(&header).expect("in-memory write");

    for arm in arms {
        let mut row = vec![
            arm.protocol_id.clone(),
            arm.intervention_type.label().to_string(),
            arm.pos_idx.to_string(),
            arm.supporting_runs.to_string(),
            arm.total_runs.to_string(),
            arm.flagged_partial.to_string(),
        ];
        for window in TimeWindow::ALL {
            row.push(format_number(arm.consensus_at(window)));
            let spread = &arm.spread[&window];
            row.push(spread.min.to_string());
            row.push(spread.max.to_string());
            row.push(spread.iqr.map(format_number).unwrap_or_default());
        }
        writer.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf-8")
}

/// Renders a whole number without a trailing `.0`, anything else with one
/// decimal place (medians and IQRs can only end in .0 or .5).
fn format_number(value: f64) -> String {
    if value.fract() == 0.0 {
        format!("{}", value as i64)
    } else {
        format!("{value:.1}")
    }
}

/// Human-readable swap summary.
pub fn swap_report_text(report: &SwapReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "groups (protocol x type):     {}", report.groups_total);
    let _ = writeln!(out, "groups with >= 2 arms:        {}", report.multi_arm_groups);
    let _ = writeln!(
        out,
        "groups with potential swaps:  {}",
        report.groups_with_potential_swaps
    );
    let _ = writeln!(out, "adjacent close pairs (<= {}d): {}", CLOSE_PAIR_DAYS, report.adjacent_close_pairs);
    for group in &report.groups {
        for pair in &group.pairs {
            if !(pair.potential_swap || pair.close_pair) {
                continue;
            }
            let mut tags = Vec::new();
            if pair.potential_swap {
                tags.push("swap");
            }
            if pair.close_pair {
                tags.push("close");
            }
            let _ = writeln!(
                out,
                "  {} {} pos {}-{}: m12 {:?} vs {:?} (medians {} vs {}) [{}]",
                group.protocol_id,
                group.intervention_type.label(),
                pair.lower_pos,
                pair.lower_pos + 1,
                pair.lower_values,
                pair.upper_values,
                format_number(pair.lower_median),
                format_number(pair.upper_median),
                tags.join(", "),
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{arm, run_result};

    #[test]
    fn positions_follow_m12_order() {
        let run = run_result(
            "P-01",
            1,
            vec![
                arm("heavy", "intervention", [2, 3, 6, 12, 15, 90]),
                arm("light", "intervention", [2, 2, 4, 8, 9, 40]),
                arm("placebo", "control", [2, 2, 4, 8, 9, 35]),
            ],
        );
        let positioned = assign_positions(&run);
        let find = |name: &str| positioned.iter().find(|p| p.arm_name == name).unwrap();
        assert_eq!(find("light").pos_idx, 0);
        assert_eq!(find("heavy").pos_idx, 1);
        assert_eq!(find("placebo").pos_idx, 0);
        assert_eq!(find("placebo").intervention_type, ArmRole::Control);
    }

    #[test]
    fn singleton_groups_get_position_zero() {
        let run = run_result("P-01", 1, vec![arm("only", "experimental", [1, 1, 1, 1, 1, 1])]);
        let positioned = assign_positions(&run);
        assert_eq!(positioned.len(), 1);
        assert_eq!(positioned[0].pos_idx, 0);
        assert_eq!(positioned[0].intervention_type, ArmRole::Intervention);
    }

    #[test]
    fn ties_break_by_m6_then_name_regardless_of_input_order() {
        let arms = vec![
            arm("zeta", "intervention", [2, 2, 4, 9, 10, 50]),
            arm("alpha", "intervention", [2, 2, 4, 8, 10, 50]),
            arm("mid", "intervention", [2, 2, 4, 8, 10, 50]),
        ];
        let forward = assign_positions(&run_result("P-01", 1, arms.clone()));
        let mut reversed_arms = arms;
        reversed_arms.reverse();
        let reversed = assign_positions(&run_result("P-01", 1, reversed_arms));

        for positioned in [&forward, &reversed] {
            let find = |name: &str| positioned.iter().find(|p| p.arm_name == name).unwrap();
            // m6 = 8 sorts before m6 = 9; names break the remaining tie.
            assert_eq!(find("alpha").pos_idx, 0);
            assert_eq!(find("mid").pos_idx, 1);
            assert_eq!(find("zeta").pos_idx, 2);
        }
    }

    fn three_run_fixture() -> Vec<RunResult> {
        let windows = |m12| [2, 2, 4, 8, 9, m12];
        vec![
            run_result("P-01", 1, vec![arm("A", "intervention", windows(10))]),
            run_result("P-01", 2, vec![arm("Arm A", "intervention", windows(12))]),
            run_result("P-01", 3, vec![arm("A (arm)", "intervention", windows(11))]),
        ]
    }

    #[test]
    fn odd_count_median_consensus() {
        let consensus = compute_consensus(&three_run_fixture());
        assert_eq!(consensus.len(), 1);
        let slot = &consensus[0];
        assert_eq!(slot.consensus_at(TimeWindow::Month12), 11.0);
        assert_eq!(slot.supporting_runs, 3);
        assert!(!slot.flagged_partial);
        assert_eq!(slot.run_values[&TimeWindow::Month12], vec![10, 12, 11]);
        assert_eq!(slot.spread[&TimeWindow::Month12].min, 10);
        assert_eq!(slot.spread[&TimeWindow::Month12].max, 12);
    }

    #[test]
    fn constant_and_even_count_medians() {
        let constant: Vec<RunResult> = (1..=5)
            .map(|i| run_result("P-01", i, vec![arm("A", "intervention", [0, 0, 0, 0, 0, 8])]))
            .collect();
        assert_eq!(compute_consensus(&constant)[0].consensus_at(TimeWindow::Month12), 8.0);

        let even = vec![
            run_result("P-01", 1, vec![arm("A", "intervention", [0, 0, 0, 0, 0, 10])]),
            run_result("P-01", 2, vec![arm("A", "intervention", [0, 0, 0, 0, 0, 20])]),
        ];
        let slot = &compute_consensus(&even)[0];
        assert_eq!(slot.consensus_at(TimeWindow::Month12), 15.0);
        assert_eq!(slot.rounded(TimeWindow::Month12), 15);
    }

    #[test]
    fn consensus_is_invariant_under_run_permutation() {
        let mut runs = three_run_fixture();
        let baseline = compute_consensus(&runs);
        runs.reverse();
        assert_eq!(compute_consensus(&runs), baseline);
        runs.swap(0, 1);
        assert_eq!(compute_consensus(&runs), baseline);
    }

    #[test]
    fn median_damps_a_single_run_swap() {
        let a = 40;
        let b = 90;
        let normal = |idx| {
            run_result(
                "P-01",
                idx,
                vec![
                    arm("x", "intervention", [2, 2, 4, 8, 9, a]),
                    arm("y", "intervention", [2, 2, 4, 8, 9, b]),
                ],
            )
        };
        // Run 3 reports swapped values for the two arms; positions resort
        // them, so each slot still sees {a, a, b swapped back}.
        let swapped = run_result(
            "P-01",
            3,
            vec![
                arm("x", "intervention", [2, 2, 4, 8, 9, b]),
                arm("y", "intervention", [2, 2, 4, 8, 9, a]),
            ],
        );
        let consensus = compute_consensus(&[normal(1), normal(2), swapped]);
        let slot0 = consensus.iter().find(|c| c.pos_idx == 0).unwrap();
        let slot1 = consensus.iter().find(|c| c.pos_idx == 1).unwrap();
        assert_eq!(slot0.consensus_at(TimeWindow::Month12), a as f64);
        assert_eq!(slot1.consensus_at(TimeWindow::Month12), b as f64);
    }

    #[test]
    fn missing_slots_are_kept_and_flagged() {
        let full = |idx| {
            run_result(
                "P-01",
                idx,
                vec![
                    arm("x", "intervention", [2, 2, 4, 8, 9, 40]),
                    arm("y", "intervention", [2, 2, 4, 8, 9, 90]),
                ],
            )
        };
        let partial = run_result("P-01", 3, vec![arm("x", "intervention", [2, 2, 4, 8, 9, 40])]);
        let consensus = compute_consensus(&[full(1), full(2), partial]);
        assert_eq!(consensus.len(), 2, "under-supported slot must be kept");
        let flagged = consensus.iter().find(|c| c.pos_idx == 1).unwrap();
        assert!(flagged.flagged_partial);
        assert_eq!(flagged.supporting_runs, 2);
        assert_eq!(flagged.total_runs, 3);
    }

    #[test]
    fn zero_runs_yield_empty_consensus() {
        assert!(compute_consensus(&[]).is_empty());
    }

    #[test]
    fn spread_fields_match_stored_run_values() {
        for slot in compute_consensus(&three_run_fixture()) {
            for window in TimeWindow::ALL {
                let values = &slot.run_values[&window];
                let spread = &slot.spread[&window];
                assert_eq!(spread.min, *values.iter().min().unwrap());
                assert_eq!(spread.max, *values.iter().max().unwrap());
                let as_f64: Vec<f64> = values.iter().map(|&v| v as f64).collect();
                assert_eq!(spread.iqr, iqr(&as_f64));
                assert_eq!(slot.consensus_at(window), median(&as_f64).unwrap());
            }
        }
    }

    fn swap_fixture(pos0: [u32; 2], pos1: [u32; 2]) -> Vec<RunResult> {
        (0..2)
            .map(|i| {
                run_result(
                    "P-01",
                    i as u32 + 1,
                    vec![
                        arm("low", "intervention", [0, 0, 0, 0, 0, pos0[i]]),
                        arm("high", "intervention", [0, 0, 0, 0, 0, pos1[i]]),
                    ],
                )
            })
            .collect()
    }

    #[test]
    fn disjoint_ranges_have_no_swap_or_close_pair() {
        let runs: Vec<RunResult> = (0..3)
            .map(|i| {
                run_result(
                    "P-01",
                    i + 1,
                    vec![
                        arm("low", "intervention", [0, 0, 0, 0, 0, 40 + i]),
                        arm("high", "intervention", [0, 0, 0, 0, 0, 90 + i]),
                    ],
                )
            })
            .collect();
        let report = analyze_swaps(&runs);
        assert_eq!(report.multi_arm_groups, 1);
        assert_eq!(report.groups_with_potential_swaps, 0);
        assert_eq!(report.adjacent_close_pairs, 0);
    }

    #[test]
    fn overlapping_ranges_are_a_potential_swap() {
        let report = analyze_swaps(&swap_fixture([40, 46], [45, 50]));
        assert_eq!(report.groups_with_potential_swaps, 1);
        let pair = &report.groups[0].pairs[0];
        assert!(pair.potential_swap, "46 >= 45 overlaps");
        assert!(!pair.close_pair, "medians 43 vs 47.5 are not close");
    }

    #[test]
    fn nearby_medians_are_a_close_pair() {
        // medians 44 and 46
        let report = analyze_swaps(&swap_fixture([43, 45], [45, 47]));
        assert_eq!(report.adjacent_close_pairs, 1);
        let pair = &report.groups[0].pairs[0];
        assert_eq!(pair.lower_median, 44.0);
        assert_eq!(pair.upper_median, 46.0);
        assert!(pair.close_pair);
    }

    #[test]
    fn singleton_groups_never_count_as_swaps() {
        let runs = vec![run_result(
            "P-01",
            1,
            vec![
                arm("only", "intervention", [0, 0, 0, 0, 0, 10]),
                arm("ctl", "control", [0, 0, 0, 0, 0, 10]),
            ],
        )];
        let report = analyze_swaps(&runs);
        assert_eq!(report.groups_total, 2);
        assert_eq!(report.multi_arm_groups, 0);
        assert!(report.groups.is_empty());
    }

    #[test]
    fn csv_emits_one_row_per_slot() {
        let csv = consensus_csv(&compute_consensus(&three_run_fixture()));
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("protocol_id,intervention_type,pos_idx"));
        assert!(lines[0].contains("12_months_iqr"));
        assert!(lines[1].starts_with("P-01,intervention,0,3,3,false"));
        assert!(lines[1].contains(",11,")); // m12 median
    }

    #[test]
    fn swap_text_mentions_flagged_pairs_only() {
        let text = swap_report_text(&analyze_swaps(&swap_fixture([40, 46], [45, 50])));
        assert!(text.contains("[swap]"));
        let calm = swap_report_text(&analyze_swaps(&swap_fixture([10, 10], [90, 90])));
        assert!(!calm.contains("pos 0-1"));
    }
}
