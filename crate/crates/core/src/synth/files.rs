//! On-disk layout of a benchmark suite.
//!
//! Each schedule lives in its own directory under the suite root:
//! `suite/<schedule_id>/` holding `schedule.html` (the rendered document),
//! `spec.json` (the generating parameters) and `truth.json` (per-arm
//! ground-truth counts). Files are versioned with a schema marker and
//! written deterministically, so re-emitting a suite yields identical bytes.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schedule::{
    count_contact_days, expand_arm_calendar, ArmRole, Complexity, ContactCategory,
    ScheduleSpec, SpecError, TimeWindow,
};
use crate::synth::render_schedule;

pub const SCHEMA_VERSION: &str = "1";
pub const DOCUMENT_FILE: &str = "schedule.html";
pub const SPEC_FILE: &str = "spec.json";
pub const TRUTH_FILE: &str = "truth.json";

#[derive(Debug, Error)]
pub enum SuiteIoError {
    #[error("schedule {schedule_id}: {source}")]
    Io {
        schedule_id: String,
        #[source]
        source: std::io::Error,
    },
    #[error("suite root {path}: {source}")]
    Root {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("schedule {schedule_id}: {source}")]
    Json {
        schedule_id: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("schedule {schedule_id}: unsupported schema version {found}")]
    SchemaVersion { schedule_id: String, found: String },
    #[error(transparent)]
    Spec(#[from] SpecError),
}

/// Versioned wrapper around a schedule spec.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpecFile {
    pub schema_version: String,
    #[serde(flatten)]
    pub spec: ScheduleSpec,
}

/// Ground truth for one window of one arm.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthWindow {
    pub contact_days: u32,
    pub categories: BTreeMap<ContactCategory, u32>,
}

/// Ground truth for one arm.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthArmRecord {
    pub role: ArmRole,
    pub label: String,
    pub windows: BTreeMap<TimeWindow, TruthWindow>,
}

/// Versioned per-schedule ground-truth file covering both arms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthFile {
    pub schema_version: String,
    pub schedule_id: String,
    pub complexity: Complexity,
    pub arms: BTreeMap<String, TruthArmRecord>,
}

impl TruthFile {
    /// The arm record with the given role.
    pub fn arm_by_role(&self, role: ArmRole) -> Option<(&String, &TruthArmRecord)> {
        self.arms.iter().find(|(_, arm)| arm.role == role)
    }

    /// Contact days for one arm and window.
    pub fn contact_days(&self, arm_id: &str, window: TimeWindow) -> Option<u32> {
        self.arms.get(arm_id)?.windows.get(&window).map(|w| w.contact_days)
    }
}

/// Computes the ground-truth file for a spec by expanding and counting
/// both arms.
pub fn truth_from_spec(spec: &ScheduleSpec) -> Result<TruthFile, SpecError> {
    let mut arms = BTreeMap::new();
    for arm in &spec.arms {
        let truth = count_contact_days(&expand_arm_calendar(spec, arm)?);
        let mut windows = BTreeMap::new();
        for window in TimeWindow::ALL {
            windows.insert(
                window,
                TruthWindow {
                    contact_days: truth.count(window),
                    categories: truth.category_counts[&window].clone(),
                },
            );
        }
        arms.insert(
            arm.arm_id.clone(),
            TruthArmRecord { role: arm.role, label: arm.label.clone(), windows },
        );
    }
    Ok(TruthFile {
        schema_version: SCHEMA_VERSION.to_string(),
        schedule_id: spec.schedule_id.clone(),
        complexity: spec.complexity,
        arms,
    })
}

/// Counts summarizing a written suite.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SuiteSummary {
    pub schedules: usize,
    pub arms: usize,
    pub comparisons: usize,
    pub by_complexity: BTreeMap<Complexity, usize>,
}

fn pretty_json<T: Serialize>(value: &T) -> String {
    let mut out = serde_json::to_string_pretty(value).expect("serializable value");
    out.push('\n');
    out
}

/// Computes the ground truth for a spec and writes the versioned truth file
/// into the schedule's directory. Re-emitting over an unchanged spec
/// produces identical bytes.
pub fn emit_ground_truth(
    schedule_dir: &Path,
    spec: &ScheduleSpec,
) -> Result<TruthFile, SuiteIoError> {
    let truth = truth_from_spec(spec)?;
    fs::write(schedule_dir.join(TRUTH_FILE), pretty_json(&truth)).map_err(|source| {
        SuiteIoError::Io { schedule_id: spec.schedule_id.clone(), source }
    })?;
    Ok(truth)
}

/// Writes rendered document, spec file and truth file for every schedule.
pub fn write_suite(root: &Path, specs: &[ScheduleSpec]) -> Result<SuiteSummary, SuiteIoError> {
    fs::create_dir_all(root)
        .map_err(|source| SuiteIoError::Root { path: root.to_path_buf(), source })?;

    let mut by_complexity: BTreeMap<Complexity, usize> = BTreeMap::new();
    let mut arms = 0;
    for spec in specs {
        let id = &spec.schedule_id;
        let io_err = |source| SuiteIoError::Io { schedule_id: id.clone(), source };

        let dir = root.join(id);
        fs::create_dir_all(&dir).map_err(io_err)?;

        let rendered = render_schedule(spec)?;
        fs::write(dir.join(DOCUMENT_FILE), rendered.document).map_err(io_err)?;

        let spec_file =
            SpecFile { schema_version: SCHEMA_VERSION.to_string(), spec: spec.clone() };
        fs::write(dir.join(SPEC_FILE), pretty_json(&spec_file)).map_err(io_err)?;

        emit_ground_truth(&dir, spec)?;

        *by_complexity.entry(spec.complexity).or_default() += 1;
        arms += spec.arms.len();
    }

    Ok(SuiteSummary {
        schedules: specs.len(),
        arms,
        comparisons: arms * TimeWindow::ALL.len(),
        by_complexity,
    })
}

/// One schedule loaded back from disk.
#[derive(Debug, Clone)]
pub struct LoadedSchedule {
    pub spec: ScheduleSpec,
    pub truth: TruthFile,
    pub dir: PathBuf,
}

impl LoadedSchedule {
    pub fn document_path(&self) -> PathBuf {
        self.dir.join(DOCUMENT_FILE)
    }
}

/// Loads every schedule directory under a suite root, sorted by id.
pub fn load_suite(root: &Path) -> Result<Vec<LoadedSchedule>, SuiteIoError> {
    let entries = fs::read_dir(root)
        .map_err(|source| SuiteIoError::Root { path: root.to_path_buf(), source })?;
    let mut dirs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();

    let mut loaded = Vec::new();
    for dir in dirs {
        let id = dir.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
        let io_err = |source| SuiteIoError::Io { schedule_id: id.clone(), source };

        let spec_raw = fs::read_to_string(dir.join(SPEC_FILE)).map_err(io_err)?;
        let spec_file: SpecFile = serde_json::from_str(&spec_raw)
            .map_err(|source| SuiteIoError::Json { schedule_id: id.clone(), source })?;
        if spec_file.schema_version != SCHEMA_VERSION {
            return Err(SuiteIoError::SchemaVersion {
                schedule_id: id.clone(),
                found: spec_file.schema_version,
            });
        }

        let truth_raw = fs::read_to_string(dir.join(TRUTH_FILE)).map_err(io_err)?;
        let truth: TruthFile = serde_json::from_str(&truth_raw)
            .map_err(|source| SuiteIoError::Json { schedule_id: id.clone(), source })?;

        loaded.push(LoadedSchedule { spec: spec_file.spec, truth, dir });
    }
    Ok(loaded)
}
