//! Strict parsing and validation of backend output.
//!
//! Backends return free text that should be JSON. Parsing tolerates
//! markdown code fences around the payload but is otherwise strict about
//! the counting schema: all six windows must be present with nonnegative
//! integer values. Quality problems that real model output exhibits
//! (non-monotone windows, unknown keys, missing optional sections) are
//! recorded as warnings on the arm rather than rejected, so they remain
//! visible to downstream stability analysis instead of biasing it.

use std::collections::BTreeMap;

use serde_json::Value;

use super::{ArmExtraction, ExtractError, ExtractionNotes, StructureExtraction};
use crate::schedule::{ArmRole, ContactCategory, TimeWindow};

/// Removes a wrapping markdown code fence (```json ... ``` or ``` ... ```),
/// if present.
fn strip_code_fences(raw: &str) -> &str {
    let trimmed = raw.trim();
    let Some(rest) = trimmed.strip_prefix("```") else {
        return trimmed;
    };
    let Some(body) = rest.strip_suffix("```") else {
        return trimmed;
    };
    // Drop an optional language tag on the opening fence line.
    match body.split_once('\n') {
        Some((first_line, remainder)) if !first_line.trim().contains(' ') => remainder.trim(),
        _ => body.trim(),
    }
}

fn parse_error(message: impl Into<String>, raw: &str) -> ExtractError {
    ExtractError::Parse { message: message.into(), raw: raw.to_string() }
}

fn as_nonnegative_int(value: &Value) -> Option<u32> {
    let n = value.as_i64()?;
    u32::try_from(n).ok()
}

/// Parses one arm object.
fn parse_arm(arm: &Value, index: usize, raw: &str) -> Result<ArmExtraction, ExtractError> {
    let obj = arm
        .as_object()
        .ok_or_else(|| parse_error(format!("arm {index} is not an object"), raw))?;
    let mut warnings = Vec::new();

    let arm_name = obj
        .get("arm_name")
        .and_then(Value::as_str)
        .ok_or_else(|| parse_error(format!("arm {index} is missing arm_name"), raw))?
        .to_string();
    let intervention_type_raw = obj
        .get("intervention_type")
        .and_then(Value::as_str)
        .ok_or_else(|| parse_error(format!("arm {index} is missing intervention_type"), raw))?
        .to_string();

    let contact_days_obj = obj
        .get("contact_days")
        .and_then(Value::as_object)
        .ok_or_else(|| parse_error(format!("arm {index} is missing contact_days"), raw))?;
    let mut contact_days = BTreeMap::new();
    for window in TimeWindow::ALL {
        let value = contact_days_obj
            .get(window.label())
            .ok_or_else(|| parse_error(format!("missing window: {}", window.label()), raw))?;
        let count = as_nonnegative_int(value).ok_or_else(|| {
            parse_error(
                format!("bad count for window {}: {value}", window.label()),
                raw,
            )
        })?;
        contact_days.insert(window, count);
    }
    for key in contact_days_obj.keys() {
        if TimeWindow::from_label(key).is_none() {
            warnings.push(format!("unknown window key: {key}"));
        }
    }
    for pair in TimeWindow::TREATMENT.windows(2) {
        let (earlier, later) = (pair[0], pair[1]);
        if contact_days[&later] < contact_days[&earlier] {
            warnings.push(format!(
                "non-monotone windows: {} ({}) < {} ({})",
                later.label(),
                contact_days[&later],
                earlier.label(),
                contact_days[&earlier],
            ));
        }
    }

    let mut category_breakdown = BTreeMap::new();
    match obj.get("category_breakdown") {
        Some(Value::Object(categories)) => {
            for (key, value) in categories {
                let Some(category) = ContactCategory::from_label(key) else {
                    warnings.push(format!("unknown category key: {key}"));
                    continue;
                };
                match value.as_i64() {
                    Some(n) => {
                        category_breakdown.insert(category, n);
                    }
                    None => warnings.push(format!("bad category count for {key}: {value}")),
                }
            }
        }
        Some(_) => {
            return Err(parse_error(
                format!("arm {index} category_breakdown is not an object"),
                raw,
            ))
        }
        None => warnings.push("missing category_breakdown".to_string()),
    }

    let notes = match obj.get("notes") {
        Some(value) => serde_json::from_value::<ExtractionNotes>(value.clone())
            .map_err(|e| parse_error(format!("arm {index} notes: {e}"), raw))?,
        None => {
            warnings.push("missing notes".to_string());
            ExtractionNotes::default()
        }
    };

    Ok(ArmExtraction {
        arm_name,
        intervention_type_raw,
        contact_days,
        category_breakdown,
        notes,
        warnings,
    })
}

/// Parses counting output (vanilla or stage-2) into per-arm extractions.
pub fn parse_extraction_output(raw: &str) -> Result<Vec<ArmExtraction>, ExtractError> {
    let payload = strip_code_fences(raw);
    let value: Value = serde_json::from_str(payload)
        .map_err(|e| parse_error(format!("output is not valid JSON: {e}"), raw))?;
    let arms = match &value {
        Value::Object(obj) => obj
            .get("arms")
            .and_then(Value::as_array)
            .ok_or_else(|| parse_error("output has no arms array", raw))?,
        Value::Array(arms) => arms,
        _ => return Err(parse_error("output is neither an object nor an array", raw)),
    };
    if arms.is_empty() {
        return Err(parse_error("arms array is empty", raw));
    }
    arms.iter().enumerate().map(|(i, arm)| parse_arm(arm, i, raw)).collect()
}

/// Parses stage-1 output into a structure blueprint.
pub fn parse_structure_output(raw: &str) -> Result<StructureExtraction, ExtractError> {
    let payload = strip_code_fences(raw);
    let value: Value = serde_json::from_str(payload)
        .map_err(|e| parse_error(format!("structure output is not valid JSON: {e}"), raw))?;
    if !value.is_object() {
        return Err(parse_error("structure output is not an object", raw));
    }
    serde_json::from_value(value).map_err(|e| parse_error(format!("structure: {e}"), raw))
}

/// Maps a free-text intervention-type string to an arm role.
///
/// Case-insensitive. Returns the role plus whether the string was
/// recognized; unrecognized strings default to intervention so the arm is
/// never dropped, and the caller can surface a warning.
pub fn normalize_intervention_type(raw: &str) -> (ArmRole, bool) {
    match raw.trim().to_ascii_lowercase().as_str() {
        "placebo" | "control" | "comparator_placebo" | "standard_of_care" => {
            (ArmRole::Control, true)
        }
        "intervention" | "active_comparator" | "experimental" | "treatment" => {
            (ArmRole::Intervention, true)
        }
        _ => (ArmRole::Intervention, false),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_arm_payload() -> String {
        r#"{"arms": [
            {"arm_name": "Pembrolizumab + Carboplatin",
             "intervention_type": "intervention",
             "contact_days": {"screening": 2, "1_month": 2, "3_months": 5,
                              "6_months": 10, "9_months": 12, "12_months": 13},
             "category_breakdown": {"core_treatment": 9, "imaging_diagnostics": 4,
                                    "labs": 9, "clinic_visits": 13},
             "notes": {"cycle_length": "21 days", "treatment_duration": "6 months",
                       "visit_pattern": "D1 of each cycle", "disease": "Breast"}},
            {"arm_name": "Placebo + Carboplatin",
             "intervention_type": "placebo",
             "contact_days": {"screening": 2, "1_month": 2, "3_months": 4,
                              "6_months": 9, "9_months": 11, "12_months": 12},
             "category_breakdown": {"core_treatment": 8, "imaging_diagnostics": 4,
                                    "labs": 8, "clinic_visits": 12},
             "notes": {}}
        ]}"#
        .to_string()
    }

    #[test]
    fn well_formed_two_arm_payload_parses() {
        let arms = parse_extraction_output(&two_arm_payload()).unwrap();
        assert_eq!(arms.len(), 2);
        assert_eq!(arms[0].arm_name, "Pembrolizumab + Carboplatin");
        assert_eq!(arms[0].contact_days_at(TimeWindow::Month12), 13);
        assert_eq!(arms[1].intervention_type_raw, "placebo");
        assert!(arms[0].warnings.is_empty());
    }

    #[test]
    fn fenced_payload_parses_identically() {
        let plain = parse_extraction_output(&two_arm_payload()).unwrap();
        let fenced = format!("```json\n{}\n```", two_arm_payload());
        assert_eq!(parse_extraction_output(&fenced).unwrap(), plain);
        let bare_fence = format!("```\n{}\n```", two_arm_payload());
        assert_eq!(parse_extraction_output(&bare_fence).unwrap(), plain);
    }

    #[test]
    fn missing_window_is_named_in_the_error() {
        let payload = two_arm_payload().replace("\"9_months\": 12,", "");
        let err = parse_extraction_output(&payload).unwrap_err();
        match err {
            ExtractError::Parse { message, raw } => {
                assert_eq!(message, "missing window: 9_months");
                assert!(raw.contains("Pembrolizumab"));
            }
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn negative_and_fractional_counts_are_rejected() {
        let negative = two_arm_payload().replace("\"screening\": 2", "\"screening\": -1");
        assert!(matches!(
            parse_extraction_output(&negative),
            Err(ExtractError::Parse { message, .. }) if message.contains("bad count")
        ));
        let fractional = two_arm_payload().replace("\"screening\": 2", "\"screening\": 2.5");
        assert!(matches!(
            parse_extraction_output(&fractional),
            Err(ExtractError::Parse { message, .. }) if message.contains("bad count")
        ));
    }

    #[test]
    fn non_monotone_windows_flag_but_do_not_fail() {
        let payload = two_arm_payload().replace("\"6_months\": 10", "\"6_months\": 3");
        let arms = parse_extraction_output(&payload).unwrap();
        assert!(arms[0].warnings.iter().any(|w| w.contains("non-monotone")));
        assert_eq!(arms[0].contact_days_at(TimeWindow::Month6), 3);
    }

    #[test]
    fn unknown_keys_warn_but_do_not_fail() {
        let payload =
            two_arm_payload().replace("\"screening\": 2,", "\"screening\": 2, \"2_weeks\": 1,");
        let arms = parse_extraction_output(&payload).unwrap();
        assert!(arms[0].warnings.iter().any(|w| w.contains("unknown window key: 2_weeks")));
    }

    #[test]
    fn garbage_and_empty_payloads_are_rejected() {
        assert!(parse_extraction_output("not json at all").is_err());
        assert!(parse_extraction_output("{\"arms\": []}").is_err());
        assert!(parse_extraction_output("{\"results\": 3}").is_err());
    }

    #[test]
    fn structure_round_trips_through_serialization() {
        let structure = StructureExtraction {
            cycle_length_days: Some(21),
            treatment_duration_months: Some(6),
            visit_days_per_cycle: Some(
                [("Arm A".to_string(), vec![1, 8])].into_iter().collect(),
            ),
            screening_days: Some(vec![-14, -7]),
            eot_offset_days: Some(30),
            followup_months: Some(vec![9, 12]),
            imaging_interval_days: Some(63),
            disease: Some("Breast".to_string()),
        };
        let serialized = serde_json::to_string(&structure).unwrap();
        assert_eq!(parse_structure_output(&serialized).unwrap(), structure);
    }

    #[test]
    fn structure_with_nulls_parses_as_missing_fields() {
        let raw = r#"{"cycle_length_days": 28, "treatment_duration_months": null,
                      "visit_days_per_cycle": null, "screening_days": null,
                      "eot_offset_days": null, "followup_months": null,
                      "imaging_interval_days": null, "disease": null}"#;
        let structure = parse_structure_output(raw).unwrap();
        assert_eq!(structure.cycle_length_days, Some(28));
        assert_eq!(structure.missing_fields().len(), 7);
    }

    #[test]
    fn normalization_follows_the_mapping_table() {
        assert_eq!(normalize_intervention_type("placebo"), (ArmRole::Control, true));
        assert_eq!(normalize_intervention_type("ACTIVE_COMPARATOR"), (ArmRole::Intervention, true));
        assert_eq!(normalize_intervention_type("Standard_of_Care"), (ArmRole::Control, true));
        assert_eq!(normalize_intervention_type(" treatment "), (ArmRole::Intervention, true));
        assert_eq!(normalize_intervention_type("arm b stuff"), (ArmRole::Intervention, false));
        assert_eq!(normalize_intervention_type(""), (ArmRole::Intervention, false));
    }
}
