//! Schedule domain model and deterministic contact-day arithmetic.
//!
//! A schedule is described parametrically by [`ScheduleSpec`]. Expanding an
//! arm turns the cycle-based visit pattern into a [`ContactCalendar`] of
//! absolute calendar days (day 1 = first treatment day, screening days are
//! zero or negative), and counting the calendar produces the [`GroundTruth`]
//! for that arm: unique contact days at six cumulative time windows plus a
//! per-category breakdown.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Error raised when a schedule spec violates its invariants.
#[derive(Debug, Error)]
#[error("invalid schedule spec: {0}")]
pub struct SpecError(pub String);

/// The six cumulative counting windows.
///
/// Treatment windows are cumulative from day 1: each later window contains
/// every earlier one. `Screening` covers only pre-treatment days (day <= 0)
/// and never overlaps the treatment windows.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub enum TimeWindow {
    #[serde(rename = "screening")]
    Screening,
    #[serde(rename = "1_month")]
    Month1,
    #[serde(rename = "3_months")]
    Month3,
    #[serde(rename = "6_months")]
    Month6,
    #[serde(rename = "9_months")]
    Month9,
    #[serde(rename = "12_months")]
    Month12,
}

impl TimeWindow {
    /// All six windows, in reporting order.
    pub const ALL: [TimeWindow; 6] = [
        TimeWindow::Screening,
        TimeWindow::Month1,
        TimeWindow::Month3,
        TimeWindow::Month6,
        TimeWindow::Month9,
        TimeWindow::Month12,
    ];

    /// The five cumulative treatment windows (everything but screening).
    pub const TREATMENT: [TimeWindow; 5] = [
        TimeWindow::Month1,
        TimeWindow::Month3,
        TimeWindow::Month6,
        TimeWindow::Month9,
        TimeWindow::Month12,
    ];

    /// Wire label used in documents, prompts and output payloads.
    pub fn label(self) -> &'static str {
        match self {
            TimeWindow::Screening => "screening",
            TimeWindow::Month1 => "1_month",
            TimeWindow::Month3 => "3_months",
            TimeWindow::Month6 => "6_months",
            TimeWindow::Month9 => "9_months",
            TimeWindow::Month12 => "12_months",
        }
    }

    /// Inverse of [`TimeWindow::label`].
    pub fn from_label(label: &str) -> Option<TimeWindow> {
        TimeWindow::ALL.into_iter().find(|w| w.label() == label)
    }

    /// Upper day bound of a treatment window; `None` for screening.
    pub fn upper_day(self) -> Option<i32> {
        match self {
            TimeWindow::Screening => None,
            TimeWindow::Month1 => Some(30),
            TimeWindow::Month3 => Some(90),
            TimeWindow::Month6 => Some(180),
            TimeWindow::Month9 => Some(270),
            TimeWindow::Month12 => Some(365),
        }
    }

    /// Whether an absolute calendar day falls inside this window.
    pub fn contains(self, day: i32) -> bool {
        match self.upper_day() {
            None => day <= 0,
            Some(upper) => day >= 1 && day <= upper,
        }
    }
}

/// Category tag for a contact day. A single day may carry several.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum ContactCategory {
    CoreTreatment,
    ImagingDiagnostics,
    Labs,
    ClinicVisits,
}

impl ContactCategory {
    pub const ALL: [ContactCategory; 4] = [
        ContactCategory::CoreTreatment,
        ContactCategory::ImagingDiagnostics,
        ContactCategory::Labs,
        ContactCategory::ClinicVisits,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ContactCategory::CoreTreatment => "core_treatment",
            ContactCategory::ImagingDiagnostics => "imaging_diagnostics",
            ContactCategory::Labs => "labs",
            ContactCategory::ClinicVisits => "clinic_visits",
        }
    }

    pub fn from_label(label: &str) -> Option<ContactCategory> {
        ContactCategory::ALL.into_iter().find(|c| c.label() == label)
    }
}

/// Role of a treatment arm within its trial.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum ArmRole {
    Intervention,
    Control,
}

impl ArmRole {
    pub fn label(self) -> &'static str {
        match self {
            ArmRole::Intervention => "intervention",
            ArmRole::Control => "control",
        }
    }
}

/// Schedule complexity, defined by the number of visit days per cycle.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum Complexity {
    Simple,
    Moderate,
    Complex,
}

impl Complexity {
    pub const ALL: [Complexity; 3] =
        [Complexity::Simple, Complexity::Moderate, Complexity::Complex];

    /// Visit days per cycle implied by the complexity level.
    pub fn visit_days_per_cycle(self) -> usize {
        match self {
            Complexity::Simple => 1,
            Complexity::Moderate => 2,
            Complexity::Complex => 3,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Complexity::Simple => "simple",
            Complexity::Moderate => "moderate",
            Complexity::Complex => "complex",
        }
    }
}

/// Treatment modality. Affects document wording only, never counts.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Systemic,
    Radiation,
    Surgery,
}

impl Modality {
    pub fn label(self) -> &'static str {
        match self {
            Modality::Systemic => "systemic",
            Modality::Radiation => "radiation",
            Modality::Surgery => "surgery",
        }
    }

    /// Human wording used in rendered documents.
    pub fn display_name(self) -> &'static str {
        match self {
            Modality::Systemic => "systemic therapy",
            Modality::Radiation => "radiation therapy",
            Modality::Surgery => "surgery",
        }
    }
}

/// The eight oncology disease sites covered by the benchmark suite.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum DiseaseCategory {
    Breast,
    Thoracic,
    Gastrointestinal,
    Genitourinary,
    HeadNeck,
    Melanoma,
    Gynecologic,
    Sarcoma,
}

impl DiseaseCategory {
    pub const ALL: [DiseaseCategory; 8] = [
        DiseaseCategory::Breast,
        DiseaseCategory::Thoracic,
        DiseaseCategory::Gastrointestinal,
        DiseaseCategory::Genitourinary,
        DiseaseCategory::HeadNeck,
        DiseaseCategory::Melanoma,
        DiseaseCategory::Gynecologic,
        DiseaseCategory::Sarcoma,
    ];

    /// Four-letter code used in schedule identifiers.
    pub fn code(self) -> &'static str {
        match self {
            DiseaseCategory::Breast => "BRST",
            DiseaseCategory::Thoracic => "THOR",
            DiseaseCategory::Gastrointestinal => "GAST",
            DiseaseCategory::Genitourinary => "GENU",
            DiseaseCategory::HeadNeck => "HDNK",
            DiseaseCategory::Melanoma => "MELA",
            DiseaseCategory::Gynecologic => "GYNE",
            DiseaseCategory::Sarcoma => "SARC",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            DiseaseCategory::Breast => "Breast",
            DiseaseCategory::Thoracic => "Thoracic",
            DiseaseCategory::Gastrointestinal => "Gastrointestinal",
            DiseaseCategory::Genitourinary => "Genitourinary",
            DiseaseCategory::HeadNeck => "Head and Neck",
            DiseaseCategory::Melanoma => "Melanoma",
            DiseaseCategory::Gynecologic => "Gynecologic",
            DiseaseCategory::Sarcoma => "Sarcoma",
        }
    }

    /// Disease-specific assessment row rendered in the SoA grid.
    pub fn specific_assessment(self) -> &'static str {
        match self {
            DiseaseCategory::Breast => "ER/PR/HER2 receptor status",
            DiseaseCategory::Thoracic => "Pulmonary function tests",
            DiseaseCategory::Gastrointestinal => "CEA tumor marker",
            DiseaseCategory::Genitourinary => "PSA tumor marker",
            DiseaseCategory::HeadNeck => "Flexible laryngoscopy",
            DiseaseCategory::Melanoma => "Full-body dermatologic exam",
            DiseaseCategory::Gynecologic => "CA-125 tumor marker",
            DiseaseCategory::Sarcoma => "Primary-site MRI",
        }
    }
}

/// Visit pattern for a single treatment arm.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArmSpec {
    pub arm_id: String,
    pub role: ArmRole,
    /// 1-based day offsets within a cycle, each in `[1, cycle_length_days]`.
    pub visit_days_per_cycle: BTreeSet<u32>,
    /// Display name used in rendered documents (e.g. a regimen name).
    pub label: String,
}

/// Allowed cycle lengths, in days.
pub const CYCLE_LENGTHS: [u32; 4] = [7, 21, 28, 35];

/// Complete parametric description of one synthetic trial schedule.
///
/// The spec is the single source of truth: ground truth, rendering and the
/// oracle backend all derive from it. `style_id` affects rendering only and
/// never changes any count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleSpec {
    pub schedule_id: String,
    pub disease_category: DiseaseCategory,
    pub complexity: Complexity,
    pub cycle_length_days: u32,
    pub treatment_duration_months: u32,
    /// Exactly two arms: one intervention, one control.
    pub arms: Vec<ArmSpec>,
    /// Day offsets of screening visits, all zero or negative.
    pub screening_days: BTreeSet<i32>,
    pub imaging_interval_days: u32,
    /// Days between the last treatment day and the end-of-treatment visit.
    pub eot_offset_days: u32,
    /// Follow-up visit months (visit day = month * 30).
    pub followup_months: Vec<u32>,
    /// Visual style, 1..=5. Rendering only.
    pub style_id: u8,
    pub modality: Modality,
}

impl ScheduleSpec {
    /// Checks every structural invariant of the spec.
    pub fn validate(&self) -> Result<(), SpecError> {
        if self.schedule_id.is_empty() {
            return Err(SpecError("schedule_id is empty".into()));
        }
        if !CYCLE_LENGTHS.contains(&self.cycle_length_days) {
            return Err(SpecError(format!(
                "cycle_length_days {} not one of {:?}",
                self.cycle_length_days, CYCLE_LENGTHS
            )));
        }
        if !(2..=12).contains(&self.treatment_duration_months) {
            return Err(SpecError(format!(
                "treatment_duration_months {} outside [2, 12]",
                self.treatment_duration_months
            )));
        }
        if self.arms.len() != 2 {
            return Err(SpecError(format!("expected 2 arms, got {}", self.arms.len())));
        }
        let interventions = self.arms.iter().filter(|a| a.role == ArmRole::Intervention).count();
        if interventions != 1 {
            return Err(SpecError(
                "arms must be exactly one intervention and one control".into(),
            ));
        }
        for arm in &self.arms {
            let n = arm.visit_days_per_cycle.len();
            if n == 0 {
                return Err(SpecError(format!("arm {} has no visit days", arm.arm_id)));
            }
            if n != self.complexity.visit_days_per_cycle() {
                return Err(SpecError(format!(
                    "arm {} has {} visit days per cycle, complexity {} requires {}",
                    arm.arm_id,
                    n,
                    self.complexity.label(),
                    self.complexity.visit_days_per_cycle()
                )));
            }
            for &d in &arm.visit_days_per_cycle {
                if d == 0 || d > self.cycle_length_days {
                    return Err(SpecError(format!(
                        "arm {} visit offset {} outside [1, {}]",
                        arm.arm_id, d, self.cycle_length_days
                    )));
                }
            }
        }
        if self.screening_days.iter().any(|&d| d > 0) {
            return Err(SpecError("screening days must be <= 0".into()));
        }
        if self.imaging_interval_days == 0 {
            return Err(SpecError("imaging_interval_days must be positive".into()));
        }
        if self.eot_offset_days == 0 {
            return Err(SpecError("eot_offset_days must be positive".into()));
        }
        if !(1..=5).contains(&self.style_id) {
            return Err(SpecError(format!("style_id {} outside [1, 5]", self.style_id)));
        }
        total_cycles(self.treatment_duration_months, self.cycle_length_days)?;
        Ok(())
    }

    pub fn intervention(&self) -> &ArmSpec {
        self.arms
            .iter()
            .find(|a| a.role == ArmRole::Intervention)
            .expect("validated spec has an intervention arm")
    }

    pub fn control(&self) -> &ArmSpec {
        self.arms
            .iter()
            .find(|a| a.role == ArmRole::Control)
            .expect("validated spec has a control arm")
    }

    /// Number of treatment cycles implied by duration and cycle length.
    pub fn total_cycles(&self) -> Result<u32, SpecError> {
        total_cycles(self.treatment_duration_months, self.cycle_length_days)
    }

    /// Absolute day of an arm's last treatment visit.
    pub fn last_treatment_day(&self, arm: &ArmSpec) -> Result<i32, SpecError> {
        let cycles = self.total_cycles()?;
        let last_offset = *arm
            .visit_days_per_cycle
            .iter()
            .next_back()
            .ok_or_else(|| SpecError(format!("arm {} has no visit days", arm.arm_id)))?;
        Ok(((cycles - 1) * self.cycle_length_days + last_offset) as i32)
    }
}

/// Per-arm set of absolute calendar days with per-day category tags.
///
/// Day 1 is the first treatment day; screening days are zero or negative.
/// The map key is the day itself, so the unique-day property is structural:
/// tagging an existing day merges category sets and never adds a day.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContactCalendar {
    pub arm_id: String,
    pub entries: BTreeMap<i32, BTreeSet<ContactCategory>>,
}

impl ContactCalendar {
    pub fn new(arm_id: impl Into<String>) -> Self {
        ContactCalendar { arm_id: arm_id.into(), entries: BTreeMap::new() }
    }

    /// Tags `day` with `categories`, merging with any existing tags.
    pub fn tag(&mut self, day: i32, categories: &[ContactCategory]) {
        let entry = self.entries.entry(day).or_default();
        entry.extend(categories.iter().copied());
    }
}

/// Unique-contact-day counts at the six cumulative windows, with a
/// per-window category breakdown.
///
/// Days may carry multiple categories, so per-window category totals can
/// exceed the unique-day count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub arm_id: String,
    pub counts: BTreeMap<TimeWindow, u32>,
    pub category_counts: BTreeMap<TimeWindow, BTreeMap<ContactCategory, u32>>,
}

impl GroundTruth {
    pub fn count(&self, window: TimeWindow) -> u32 {
        self.counts.get(&window).copied().unwrap_or(0)
    }
}

/// Number of treatment cycles: `floor(duration_months * 30 / cycle_length_days)`.
pub fn total_cycles(duration_months: u32, cycle_length_days: u32) -> Result<u32, SpecError> {
    if duration_months == 0 {
        return Err(SpecError("treatment duration must be at least 1 month".into()));
    }
    if cycle_length_days == 0 {
        return Err(SpecError("cycle length must be at least 1 day".into()));
    }
    Ok(duration_months * 30 / cycle_length_days)
}

/// Expands an arm's cycle-based visit pattern into a calendar of absolute days.
///
/// Treatment visit days carry `{core_treatment, labs, clinic_visits}`;
/// imaging days (every `imaging_interval_days` during the treatment phase)
/// carry `{imaging_diagnostics}`; the end-of-treatment visit carries
/// `{clinic_visits}`; follow-up visits at `month * 30` carry
/// `{clinic_visits, imaging_diagnostics}`; screening visits carry
/// `{clinic_visits, labs}`. Coinciding days merge their category sets.
pub fn expand_arm_calendar(
    spec: &ScheduleSpec,
    arm: &ArmSpec,
) -> Result<ContactCalendar, SpecError> {
    if !spec.arms.iter().any(|a| a.arm_id == arm.arm_id) {
        return Err(SpecError(format!(
            "arm {} does not belong to schedule {}",
            arm.arm_id, spec.schedule_id
        )));
    }
    if arm.visit_days_per_cycle.is_empty() {
        return Err(SpecError(format!("arm {} has no visit days", arm.arm_id)));
    }
    for &d in &arm.visit_days_per_cycle {
        if d == 0 || d > spec.cycle_length_days {
            return Err(SpecError(format!(
                "arm {} visit offset {} exceeds cycle length {}",
                arm.arm_id, d, spec.cycle_length_days
            )));
        }
    }
    if spec.screening_days.iter().any(|&d| d > 0) {
        return Err(SpecError("screening days must be <= 0".into()));
    }

    let cycles = spec.total_cycles()?;
    let mut calendar = ContactCalendar::new(arm.arm_id.clone());

    for cycle in 1..=cycles {
        for &offset in &arm.visit_days_per_cycle {
            let day = ((cycle - 1) * spec.cycle_length_days + offset) as i32;
            calendar.tag(
                day,
                &[
                    ContactCategory::CoreTreatment,
                    ContactCategory::Labs,
                    ContactCategory::ClinicVisits,
                ],
            );
        }
    }

    if cycles >= 1 {
        let last_day = spec.last_treatment_day(arm)?;
        let interval = spec.imaging_interval_days as i32;
        let mut day = interval;
        while day <= last_day {
            calendar.tag(day, &[ContactCategory::ImagingDiagnostics]);
            day += interval;
        }
        calendar.tag(last_day + spec.eot_offset_days as i32, &[ContactCategory::ClinicVisits]);
    }

    for &month in &spec.followup_months {
        calendar.tag(
            (month * 30) as i32,
            &[ContactCategory::ClinicVisits, ContactCategory::ImagingDiagnostics],
        );
    }

    for &day in &spec.screening_days {
        calendar.tag(day, &[ContactCategory::ClinicVisits, ContactCategory::Labs]);
    }

    Ok(calendar)
}

/// Counts unique contact days per cumulative window, plus the per-category
/// breakdown. Screening counts days `<= 0`; treatment windows count days in
/// `[1, upper]`.
pub fn count_contact_days(calendar: &ContactCalendar) -> GroundTruth {
    let mut counts = BTreeMap::new();
    let mut category_counts = BTreeMap::new();

    for window in TimeWindow::ALL {
        let in_window: Vec<_> = calendar
            .entries
            .iter()
            .filter(|(&day, _)| window.contains(day))
            .collect();
        counts.insert(window, in_window.len() as u32);

        let mut per_category = BTreeMap::new();
        for category in ContactCategory::ALL {
            let n = in_window.iter().filter(|(_, cats)| cats.contains(&category)).count();
            per_category.insert(category, n as u32);
        }
        category_counts.insert(window, per_category);
    }

    GroundTruth { arm_id: calendar.arm_id.clone(), counts, category_counts }
}
