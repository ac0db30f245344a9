//! Prompt construction from versioned template assets.
//!
//! Templates live under `assets/prompts/` and are compiled into the binary;
//! their SHA-256 hashes are recorded in every run result so outputs stay
//! attributable to the exact instructions that produced them.

use sha2::{Digest, Sha256};

use super::{ExtractError, StructureExtraction};

pub const VANILLA_TEMPLATE: &str = include_str!("../../assets/prompts/vanilla_v1.txt");
pub const STRUCTURE_TEMPLATE: &str = include_str!("../../assets/prompts/structure_v1.txt");
pub const COUNT_TEMPLATE: &str = include_str!("../../assets/prompts/count_v1.txt");

const DOCUMENT_SLOT: &str = "{{DOCUMENT}}";
const STRUCTURE_SLOT: &str = "{{STRUCTURE_JSON}}";

/// SHA-256 of a template, hex-encoded.
pub fn template_hash(template: &str) -> String {
    hex::encode(Sha256::digest(template.as_bytes()))
}

fn require_document(document: &str) -> Result<(), ExtractError> {
    if document.trim().is_empty() {
        return Err(ExtractError::EmptyDocument);
    }
    Ok(())
}

/// Builds the single-call extraction prompt.
pub fn build_vanilla_prompt(document: &str) -> Result<String, ExtractError> {
    require_document(document)?;
    Ok(VANILLA_TEMPLATE.replace(DOCUMENT_SLOT, document))
}

/// Builds the stage-1 structure-blueprint prompt.
pub fn build_structure_prompt(document: &str) -> Result<String, ExtractError> {
    require_document(document)?;
    Ok(STRUCTURE_TEMPLATE.replace(DOCUMENT_SLOT, document))
}

/// Builds the stage-2 counting prompt around a parsed blueprint.
///
/// Blueprint fields the stage-1 call could not fill are serialized as the
/// string `"unknown"` so the model reads them from the document instead of
/// trusting a fabricated value. A blueprint with no fields at all is
/// rejected: stage 2 exists to be guided.
pub fn build_count_prompt(
    structure: &StructureExtraction,
    document: &str,
) -> Result<String, ExtractError> {
    require_document(document)?;
    if structure.is_empty() {
        return Err(ExtractError::EmptyStructure);
    }
    let mut value = serde_json::to_value(structure).expect("structure serializes");
    if let serde_json::Value::Object(fields) = &mut value {
        for field in fields.values_mut() {
            if field.is_null() {
                *field = serde_json::Value::String("unknown".to_string());
            }
        }
    }
    let serialized = serde_json::to_string_pretty(&value).expect("structure serializes");
    Ok(COUNT_TEMPLATE.replace(STRUCTURE_SLOT, &serialized).replace(DOCUMENT_SLOT, document))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::TimeWindow;

    #[test]
    fn vanilla_prompt_names_every_window_and_the_expansion_rule() {
        let prompt = build_vanilla_prompt("some document").unwrap();
        for window in TimeWindow::ALL {
            assert!(prompt.contains(window.label()), "missing {}", window.label());
        }
        assert!(prompt.contains("Expand grouped columns"));
        assert!(prompt.contains("C4-C12"));
        assert!(prompt.contains("unique calendar day ONCE"));
        assert!(prompt.contains("some document"));
        assert!(!prompt.contains(DOCUMENT_SLOT));
    }

    #[test]
    fn vanilla_prompt_defines_all_categories() {
        let prompt = build_vanilla_prompt("doc").unwrap();
        for category in crate::schedule::ContactCategory::ALL {
            assert!(prompt.contains(category.label()), "missing {}", category.label());
        }
    }

    #[test]
    fn template_hashes_are_stable_and_distinct() {
        assert_eq!(template_hash(VANILLA_TEMPLATE), template_hash(VANILLA_TEMPLATE));
        assert_ne!(template_hash(VANILLA_TEMPLATE), template_hash(STRUCTURE_TEMPLATE));
        assert_eq!(template_hash(VANILLA_TEMPLATE).len(), 64);
    }

    #[test]
    fn empty_documents_are_rejected() {
        assert!(matches!(build_vanilla_prompt("  \n"), Err(ExtractError::EmptyDocument)));
        assert!(matches!(build_structure_prompt(""), Err(ExtractError::EmptyDocument)));
    }

    #[test]
    fn count_prompt_embeds_formula_and_structure() {
        let structure = StructureExtraction {
            cycle_length_days: Some(21),
            treatment_duration_months: Some(6),
            ..StructureExtraction::default()
        };
        let prompt = build_count_prompt(&structure, "doc").unwrap();
        assert!(prompt
            .contains("Total cycles = floor(treatment_duration_months * 30 / cycle_length_days)"));
        assert!(prompt.contains("\"cycle_length_days\": 21"));
        assert!(prompt.contains("\"treatment_duration_months\": 6"));
        assert!(prompt.contains("\"screening_days\": \"unknown\""));
    }

    #[test]
    fn count_prompt_refuses_an_empty_structure() {
        let err = build_count_prompt(&StructureExtraction::default(), "doc").unwrap_err();
        assert!(matches!(err, ExtractError::EmptyStructure));
    }
}
