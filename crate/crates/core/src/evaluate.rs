//! Accuracy metrics, signed-error distribution and reproducibility analysis.
//!
//! Accuracy compares extracted counts against ground truth per
//! (schedule, arm, window) comparison: exact-match rate, within-3-days rate
//! (boundary inclusive) and mean absolute error, plus a per-window and
//! per-complexity error-distribution table.
//!
//! Reproducibility classifies each consensus slot by the spread of its
//! 12-month count across repeated runs, using the median-exclusive
//! (Moore-McCabe) interquartile range: lower and upper halves exclude the
//! overall median when the count is odd, quartiles are the half medians,
//! and IQR is their difference. Categories: perfect (IQR = 0), clinically
//! acceptable (IQR <= 3, includes perfect) and high variance (IQR > 3).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::consensus::assign_positions;
use crate::extract::RunResult;
use crate::schedule::{ArmRole, Complexity, TimeWindow};

/// Within-k threshold used for the headline accuracy metric, in days.
pub const WITHIN_DAYS: i64 = 3;

/// IQR threshold for clinically acceptable reproducibility, in days.
pub const ACCEPTABLE_IQR: f64 = 3.0;

#[derive(Debug, Error)]
#[error("metric undefined: {0}")]
pub struct MetricError(pub String);

/// One extracted-vs-truth comparison.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationRecord {
    pub schedule_id: String,
    pub arm_id: String,
    pub window: TimeWindow,
    pub extracted: i64,
    pub truth: i64,
    /// `extracted - truth`; stored redundantly for tabular output.
    pub signed_error: i64,
    pub complexity: Complexity,
}

impl ValidationRecord {
    pub fn new(
        schedule_id: impl Into<String>,
        arm_id: impl Into<String>,
        window: TimeWindow,
        extracted: i64,
        truth: i64,
        complexity: Complexity,
    ) -> Self {
        ValidationRecord {
            schedule_id: schedule_id.into(),
            arm_id: arm_id.into(),
            window,
            extracted,
            truth,
            signed_error: extracted - truth,
            complexity,
        }
    }
}

fn require_nonempty(records: &[ValidationRecord]) -> Result<(), MetricError> {
    if records.is_empty() {
        return Err(MetricError("no validation records".to_string()));
    }
    Ok(())
}

/// Fraction of records with zero signed error.
pub fn exact_match_rate(records: &[ValidationRecord]) -> Result<f64, MetricError> {
    require_nonempty(records)?;
    let exact = records.iter().filter(|r| r.signed_error == 0).count();
    Ok(exact as f64 / records.len() as f64)
}

/// Fraction of records with |signed error| <= k (boundary inclusive).
pub fn within_k_rate(records: &[ValidationRecord], k: i64) -> Result<f64, MetricError> {
    require_nonempty(records)?;
    let within = records.iter().filter(|r| r.signed_error.abs() <= k).count();
    Ok(within as f64 / records.len() as f64)
}

/// Mean absolute error in days.
pub fn mae(records: &[ValidationRecord]) -> Result<f64, MetricError> {
    require_nonempty(records)?;
    let total: i64 = records.iter().map(|r| r.signed_error.abs()).sum();
    Ok(total as f64 / records.len() as f64)
}

/// Error statistics for one slice of records (a window, a complexity level,
/// or everything).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorRow {
    pub n: usize,
    pub median_error: f64,
    pub mean_error: f64,
    pub mae: f64,
    pub pct_overcount: f64,
    pub pct_undercount: f64,
    pub pct_exact: f64,
}

impl ErrorRow {
    fn from_errors(errors: &[i64]) -> ErrorRow {
        let n = errors.len();
        let as_f64: Vec<f64> = errors.iter().map(|&e| e as f64).collect();
        let pct = |count: usize| count as f64 / n as f64 * 100.0;
        ErrorRow {
            n,
            median_error: median(&as_f64).expect("nonempty slice"),
            mean_error: as_f64.iter().sum::<f64>() / n as f64,
            mae: errors.iter().map(|e| e.abs()).sum::<i64>() as f64 / n as f64,
            pct_overcount: pct(errors.iter().filter(|&&e| e > 0).count()),
            pct_undercount: pct(errors.iter().filter(|&&e| e < 0).count()),
            pct_exact: pct(errors.iter().filter(|&&e| e == 0).count()),
        }
    }
}

/// Signed-error distribution: overall, by time window, and by schedule
/// complexity. Overcount/undercount/exact percentages partition each row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorDistribution {
    pub overall: ErrorRow,
    pub per_window: BTreeMap<TimeWindow, ErrorRow>,
    pub per_complexity: BTreeMap<Complexity, ErrorRow>,
}

pub fn error_distribution(
    records: &[ValidationRecord],
) -> Result<ErrorDistribution, MetricError> {
    require_nonempty(records)?;
    let errors_of = |filter: &dyn Fn(&ValidationRecord) -> bool| -> Vec<i64> {
        records.iter().filter(|r| filter(r)).map(|r| r.signed_error).collect()
    };

    let mut per_window = BTreeMap::new();
    for window in TimeWindow::ALL {
        let errors = errors_of(&|r| r.window == window);
        if !errors.is_empty() {
            per_window.insert(window, ErrorRow::from_errors(&errors));
        }
    }
    let mut per_complexity = BTreeMap::new();
    for complexity in Complexity::ALL {
        let errors = errors_of(&|r| r.complexity == complexity);
        if !errors.is_empty() {
            per_complexity.insert(complexity, ErrorRow::from_errors(&errors));
        }
    }
    let all: Vec<i64> = records.iter().map(|r| r.signed_error).collect();
    Ok(ErrorDistribution {
        overall: ErrorRow::from_errors(&all),
        per_window,
        per_complexity,
    })
}

/// Median of a sample; `None` for an empty slice. Even counts average the
/// two middle values.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    Some(if n % 2 == 1 { sorted[n / 2] } else { (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0 })
}

/// Interquartile range under the median-exclusive (Moore-McCabe) convention:
/// the sorted sample is split into lower and upper halves, excluding the
/// overall median when the count is odd; IQR = median(upper) - median(lower).
/// `None` for fewer than two values.
pub fn iqr(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let half = sorted.len() / 2;
    let q1 = median(&sorted[..half]).expect("half is nonempty");
    let q3 = median(&sorted[sorted.len() - half..]).expect("half is nonempty");
    Some(q3 - q1)
}

/// Reproducibility category of one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityCategory {
    Perfect,
    Acceptable,
    HighVariance,
}

impl StabilityCategory {
    pub fn label(self) -> &'static str {
        match self {
            StabilityCategory::Perfect => "perfect",
            StabilityCategory::Acceptable => "acceptable",
            StabilityCategory::HighVariance => "high_variance",
        }
    }

    /// Whether the slot is clinically acceptable (IQR <= 3); true for both
    /// perfect and acceptable, matching the nested reporting convention.
    pub fn is_acceptable(self) -> bool {
        self != StabilityCategory::HighVariance
    }
}

/// Classifies a slot by the IQR of its 12-month counts across runs.
/// `None` for fewer than two values. The returned category is the finest
/// one: perfect (IQR = 0), acceptable (0 < IQR <= 3), high variance.
pub fn classify_stability(m12_values: &[u32]) -> Option<StabilityCategory> {
    let as_f64: Vec<f64> = m12_values.iter().map(|&v| v as f64).collect();
    let spread = iqr(&as_f64)?;
    Some(if spread == 0.0 {
        StabilityCategory::Perfect
    } else if spread <= ACCEPTABLE_IQR {
        StabilityCategory::Acceptable
    } else {
        StabilityCategory::HighVariance
    })
}

/// Stability of one (protocol, intervention type, position) slot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityRecord {
    pub protocol_id: String,
    pub intervention_type: ArmRole,
    pub pos_idx: usize,
    /// 12-month counts across the runs the slot appeared in.
    pub m12_values: Vec<u32>,
    pub iqr: f64,
    pub category: StabilityCategory,
    /// Whether the slot appeared in every run of its protocol.
    pub in_every_run: bool,
}

/// Nested category counts for one slot population.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct StabilityCounts {
    pub arms: usize,
    pub perfect: usize,
    /// Acceptable includes perfect (nested, not disjoint).
    pub acceptable: usize,
    pub high_variance: usize,
}

impl StabilityCounts {
    fn add(&mut self, category: StabilityCategory) {
        self.arms += 1;
        if category == StabilityCategory::Perfect {
            self.perfect += 1;
        }
        if category.is_acceptable() {
            self.acceptable += 1;
        } else {
            self.high_variance += 1;
        }
    }

    pub fn pct_perfect(&self) -> f64 {
        percentage(self.perfect, self.arms)
    }

    pub fn pct_acceptable(&self) -> f64 {
        percentage(self.acceptable, self.arms)
    }

    pub fn pct_high_variance(&self) -> f64 {
        percentage(self.high_variance, self.arms)
    }
}

fn percentage(part: usize, whole: usize) -> f64 {
    if whole == 0 {
        0.0
    } else {
        part as f64 / whole as f64 * 100.0
    }
}

/// Run-to-run reproducibility over an experiment's runs.
///
/// Whether "arms analyzed" should mean slots present in every run or any
/// slot with at least two observations is a reporting choice; both
/// populations are computed so reports can show them side by side.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    /// Slots with >= 2 observations, each flagged with `in_every_run`.
    pub records: Vec<StabilityRecord>,
    /// Counts over slots present in every run of their protocol.
    pub complete_slots: StabilityCounts,
    /// Counts over all slots with >= 2 observations.
    pub observed_slots: StabilityCounts,
    /// Slots seen in only one run; unclassifiable.
    pub single_run_slots: usize,
}

/// Classifies every (protocol, type, position) slot across runs.
pub fn stability_report(runs: &[RunResult]) -> StabilityReport {
    let mut runs_per_protocol: BTreeMap<&str, BTreeSet<u32>> = BTreeMap::new();
    for run in runs {
        runs_per_protocol.entry(&run.protocol_id).or_default().insert(run.run_index);
    }

    let mut slots: BTreeMap<(String, ArmRole, usize), Vec<u32>> = BTreeMap::new();
    for run in runs {
        for positioned in assign_positions(run) {
            slots
                .entry((
                    positioned.protocol_id.clone(),
                    positioned.intervention_type,
                    positioned.pos_idx,
                ))
                .or_default()
                .push(positioned.contact_days_at(TimeWindow::Month12));
        }
    }

    let mut records = Vec::new();
    let mut complete_slots = StabilityCounts::default();
    let mut observed_slots = StabilityCounts::default();
    let mut single_run_slots = 0;
    for ((protocol_id, intervention_type, pos_idx), m12_values) in slots {
        let Some(category) = classify_stability(&m12_values) else {
            single_run_slots += 1;
            continue;
        };
        let as_f64: Vec<f64> = m12_values.iter().map(|&v| v as f64).collect();
        let in_every_run =
            m12_values.len() == runs_per_protocol[protocol_id.as_str()].len();
        observed_slots.add(category);
        if in_every_run {
            complete_slots.add(category);
        }
        records.push(StabilityRecord {
            protocol_id,
            intervention_type,
            pos_idx,
            iqr: iqr(&as_f64).expect(">= 2 values"),
            m12_values,
            category,
            in_every_run,
        });
    }

    StabilityReport { records, complete_slots, observed_slots, single_run_slots }
}

/// Headline accuracy block (exact, within-3, MAE), one metric per line.
pub fn accuracy_summary_text(records: &[ValidationRecord]) -> Result<String, MetricError> {
    let exact = exact_match_rate(records)? * 100.0;
    let within = within_k_rate(records, WITHIN_DAYS)? * 100.0;
    let mae = mae(records)?;
    let mut out = String::new();
    let _ = writeln!(out, "comparisons:            {}", records.len());
    let _ = writeln!(out, "exact match:            {exact:.1}%");
    let _ = writeln!(out, "within +/-{WITHIN_DAYS} days:       {within:.1}%");
    let _ = writeln!(out, "mean absolute error:    {mae:.2} days");
    Ok(out)
}

fn error_row_line(out: &mut String, label: &str, row: &ErrorRow) {
    let _ = writeln!(
        out,
        "{label:<12} {n:>5} {median:>8.1} {mean:>8.2} {mae:>8.2} {over:>7.1}% {under:>7.1}% {exact:>7.1}%",
        n = row.n,
        median = row.median_error,
        mean = row.mean_error,
        mae = row.mae,
        over = row.pct_overcount,
        under = row.pct_undercount,
        exact = row.pct_exact,
    );
}

/// Error-distribution table: one row per window, then per complexity, then
/// overall.
pub fn error_distribution_text(distribution: &ErrorDistribution) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<12} {:>5} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}",
        "slice", "n", "median", "mean", "mae", "over", "under", "exact"
    );
    for (window, row) in &distribution.per_window {
        error_row_line(&mut out, window.label(), row);
    }
    for (complexity, row) in &distribution.per_complexity {
        error_row_line(&mut out, complexity.label(), row);
    }
    error_row_line(&mut out, "overall", &distribution.overall);
    out
}

fn stability_counts_lines(out: &mut String, label: &str, counts: &StabilityCounts) {
    let _ = writeln!(out, "{label} (n = {}):", counts.arms);
    let _ = writeln!(
        out,
        "  perfect (IQR = 0):          {:>5} ({:.1}%)",
        counts.perfect,
        counts.pct_perfect()
    );
    let _ = writeln!(
        out,
        "  acceptable (IQR <= 3):      {:>5} ({:.1}%)",
        counts.acceptable,
        counts.pct_acceptable()
    );
    let _ = writeln!(
        out,
        "  high variance (IQR > 3):    {:>5} ({:.1}%)",
        counts.high_variance,
        counts.pct_high_variance()
    );
}

/// Stability summary mirroring the nested category layout.
pub fn stability_text(report: &StabilityReport) -> String {
    let mut out = String::new();
    stability_counts_lines(&mut out, "slots present in every run", &report.complete_slots);
    stability_counts_lines(&mut out, "slots with >= 2 observations", &report.observed_slots);
    let _ = writeln!(out, "single-run slots (unclassifiable): {}", report.single_run_slots);
    out
}

/// Per-comparison rows for plotting: one line per validation record.
pub fn validation_csv(records: &[ValidationRecord]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record([
            "schedule_id",
            "arm_id",
            "window",
            "complexity",
            "extracted",
            "truth",
            "signed_error",
        ])
        .expect("in-memory write");
    for r in records {
        writer
            .write_record([
                r.schedule_id.as_str(),
                r.arm_id.as_str(),
                r.window.label(),
                r.complexity.label(),
                &r.extracted.to_string(),
                &r.truth.to_string(),
                &r.signed_error.to_string(),
            ])
            .expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf-8")
}

/// Tabular form of the stability classification: one row per slot.
pub fn stability_csv(report: &StabilityReport) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record([
            "protocol_id",
            "intervention_type",
            "pos_idx",
            "m12_values",
            "iqr",
            "category",
            "in_every_run",
        ])
        .expect("in-memory write");
    for r in &report.records {
        let values =
            r.m12_values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ");
        writer
            .write_record([
                r.protocol_id.as_str(),
                r.intervention_type.label(),
                &r.pos_idx.to_string(),
                &values,
                &format!("{}", r.iqr),
                r.category.label(),
                &r.in_every_run.to_string(),
            ])
            .expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf-8")
}
