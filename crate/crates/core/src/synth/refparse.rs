//! Reference parser for rendered schedule documents.
//!
//! Recovers the structural parameters (cycle length, total cycles, per-arm
//! visit offsets, screening days, imaging cadence, EOT offset, follow-up
//! months) from a rendered document's arm block, grid and footnotes. Its job
//! is to guard against drift between the renderer and the ground-truth
//! arithmetic: round-tripping every suite schedule through render + parse
//! must reproduce the spec's structure exactly.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use regex::Regex;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ParseDocError {
    #[error("document is missing {0}")]
    Missing(&'static str),
    #[error("malformed {what}: {detail}")]
    Malformed { what: &'static str, detail: String },
    #[error("inconsistent document: {0}")]
    Inconsistent(String),
}

/// Structure recovered from a rendered document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedSchedule {
    pub cycle_length_days: u32,
    pub total_cycles: u32,
    pub treatment_duration_months: u32,
    /// Per-arm visit offsets as stated in the arm description block.
    pub arm_a_days: BTreeSet<u32>,
    pub arm_b_days: BTreeSet<u32>,
    /// Per-arm visit offsets as recovered from the treatment row of the grid.
    pub grid_arm_a_days: BTreeSet<u32>,
    pub grid_arm_b_days: BTreeSet<u32>,
    pub screening_days: BTreeSet<i32>,
    pub imaging_interval_days: u32,
    pub eot_offset_days: u32,
    pub followup_months: Vec<u32>,
}

fn regex(cell: &'static OnceLock<Regex>, pattern: &'static str) -> &'static Regex {
    cell.get_or_init(|| Regex::new(pattern).expect("static regex"))
}

macro_rules! static_regex {
    ($pattern:expr) => {{
        static CELL: OnceLock<Regex> = OnceLock::new();
        regex(&CELL, $pattern)
    }};
}

fn parse_day_list<T: std::str::FromStr>(
    list: &str,
    what: &'static str,
) -> Result<Vec<T>, ParseDocError> {
    list.split(',')
        .map(|part| {
            part.trim().parse::<T>().map_err(|_| ParseDocError::Malformed {
                what,
                detail: format!("bad number in {list:?}"),
            })
        })
        .collect()
}

/// Parses a rendered document back into its structural parameters.
pub fn parse_rendered(document: &str) -> Result<ParsedSchedule, ParseDocError> {
    let duration_re = static_regex!(
        r"Treatment duration: (\d+) months \((\d+) cycles of (\d+) days\)\."
    );
    let caps = duration_re
        .captures(document)
        .ok_or(ParseDocError::Missing("treatment duration footnote"))?;
    let treatment_duration_months: u32 = caps[1].parse().unwrap();
    let stated_cycles: u32 = caps[2].parse().unwrap();
    let cycle_length_days: u32 = caps[3].parse().unwrap();

    let arm_re = static_regex!(
        r"Arm (A|B) \((?:Investigational|Control)\): .*\. Visits on day\(s\) ([0-9, ]+) of each cycle\."
    );
    let mut arm_a_days = None;
    let mut arm_b_days = None;
    for caps in arm_re.captures_iter(document) {
        let days: BTreeSet<u32> =
            parse_day_list(&caps[2], "arm visit days")?.into_iter().collect();
        match &caps[1] {
            "A" => arm_a_days = Some(days),
            _ => arm_b_days = Some(days),
        }
    }
    let arm_a_days = arm_a_days.ok_or(ParseDocError::Missing("arm A description"))?;
    let arm_b_days = arm_b_days.ok_or(ParseDocError::Missing("arm B description"))?;

    let screening_re =
        static_regex!(r"Screening visits on day\(s\) ([-0-9, ]+) relative to C1D1\.");
    let caps = screening_re
        .captures(document)
        .ok_or(ParseDocError::Missing("screening footnote"))?;
    let screening_days: BTreeSet<i32> =
        parse_day_list(&caps[1], "screening days")?.into_iter().collect();

    let imaging_re = static_regex!(r"Imaging every (\d+) days during the treatment phase");
    let imaging_interval_days = imaging_re
        .captures(document)
        .ok_or(ParseDocError::Missing("imaging footnote"))?[1]
        .parse()
        .unwrap();

    let eot_re =
        static_regex!(r"End-of-treatment \(EOT\) visit (\d+) days after the last treatment visit\.");
    let eot_offset_days = eot_re
        .captures(document)
        .ok_or(ParseDocError::Missing("EOT footnote"))?[1]
        .parse()
        .unwrap();

    let followup_re = static_regex!(r"Follow-up visits at month\(s\) ([0-9, ]+) \(");
    let followup_months = match followup_re.captures(document) {
        Some(caps) => parse_day_list(&caps[1], "follow-up months")?,
        None => Vec::new(),
    };

    // Header row: visit columns in grid order.
    let header_re = static_regex!(r"<th class=.visit.>(?:<span>)?([^<]+)(?:</span>)?</th>");
    let headers: Vec<String> =
        header_re.captures_iter(document).map(|c| c[1].to_string()).collect();
    if headers.is_empty() {
        return Err(ParseDocError::Missing("grid header row"));
    }

    // Legend: map superscript glyphs to arms.
    let legend_re = static_regex!(r"X<sup>([^<]+)</sup> = Arm (A|B) only");
    let mut glyph_a = None;
    let mut glyph_b = None;
    for caps in legend_re.captures_iter(document) {
        match &caps[2] {
            "A" => glyph_a = Some(caps[1].to_string()),
            _ => glyph_b = Some(caps[1].to_string()),
        }
    }
    let glyph_a = glyph_a.ok_or(ParseDocError::Missing("arm A legend entry"))?;
    let glyph_b = glyph_b.ok_or(ParseDocError::Missing("arm B legend entry"))?;

    // Treatment row: cells in grid order, aligned with the header roster.
    let row_re = static_regex!(
        r"<td class=.assessment.>Study treatment administration</td>((?:<td>[^<]*(?:<sup>[^<]+</sup>)?</td>)+)"
    );
    let row = row_re
        .captures(document)
        .ok_or(ParseDocError::Missing("treatment administration row"))?[1]
        .to_string();
    let cell_re = static_regex!(r"<td>(X)?(?:<sup>([^<]+)</sup>)?</td>");
    let cells: Vec<Option<Option<String>>> = cell_re
        .captures_iter(&row)
        .map(|caps| caps.get(1).map(|_| caps.get(2).map(|g| g.as_str().to_string())))
        .collect();
    if cells.len() != headers.len() {
        return Err(ParseDocError::Inconsistent(format!(
            "treatment row has {} cells for {} columns",
            cells.len(),
            headers.len()
        )));
    }

    let cycle_header_re = static_regex!(r"^C(\d+)D(\d+)$");
    let grouped_header_re = static_regex!(r"^C(\d+)-C(\d+) \(D(\d+)\)$");
    let mut grid_arm_a_days = BTreeSet::new();
    let mut grid_arm_b_days = BTreeSet::new();
    let mut max_cycle = 0u32;
    for (header, cell) in headers.iter().zip(&cells) {
        let offset = if let Some(caps) = cycle_header_re.captures(header) {
            max_cycle = max_cycle.max(caps[1].parse().unwrap());
            Some(caps[2].parse::<u32>().unwrap())
        } else if let Some(caps) = grouped_header_re.captures(header) {
            max_cycle = max_cycle.max(caps[2].parse().unwrap());
            Some(caps[3].parse::<u32>().unwrap())
        } else {
            None
        };
        let Some(offset) = offset else { continue };
        match cell {
            Some(None) => {
                grid_arm_a_days.insert(offset);
                grid_arm_b_days.insert(offset);
            }
            Some(Some(glyph)) if *glyph == glyph_a => {
                grid_arm_a_days.insert(offset);
            }
            Some(Some(glyph)) if *glyph == glyph_b => {
                grid_arm_b_days.insert(offset);
            }
            Some(Some(glyph)) => {
                return Err(ParseDocError::Inconsistent(format!(
                    "unknown marker glyph {glyph:?} in treatment row"
                )));
            }
            None => {
                return Err(ParseDocError::Inconsistent(format!(
                    "blank treatment cell under visit column {header}"
                )));
            }
        }
    }
    if max_cycle != stated_cycles {
        return Err(ParseDocError::Inconsistent(format!(
            "grid shows {max_cycle} cycles, footnote states {stated_cycles}"
        )));
    }

    Ok(ParsedSchedule {
        cycle_length_days,
        total_cycles: stated_cycles,
        treatment_duration_months,
        arm_a_days,
        arm_b_days,
        grid_arm_a_days,
        grid_arm_b_days,
        screening_days,
        imaging_interval_days,
        eot_offset_days,
        followup_months,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_suite, render_schedule, SuiteConfig};

    #[test]
    fn round_trip_recovers_structure_for_the_whole_suite() {
        let specs = generate_suite(&SuiteConfig::default()).unwrap();
        for spec in &specs {
            let rendered = render_schedule(spec).unwrap();
            let parsed = parse_rendered(&rendered.document)
                .unwrap_or_else(|e| panic!("{}: {e}", spec.schedule_id));

            assert_eq!(parsed.cycle_length_days, spec.cycle_length_days, "{}", spec.schedule_id);
            assert_eq!(parsed.total_cycles, spec.total_cycles().unwrap());
            assert_eq!(parsed.treatment_duration_months, spec.treatment_duration_months);
            assert_eq!(parsed.arm_a_days, spec.intervention().visit_days_per_cycle);
            assert_eq!(parsed.arm_b_days, spec.control().visit_days_per_cycle);
            assert_eq!(parsed.grid_arm_a_days, spec.intervention().visit_days_per_cycle);
            assert_eq!(parsed.grid_arm_b_days, spec.control().visit_days_per_cycle);
            assert_eq!(parsed.screening_days, spec.screening_days);
            assert_eq!(parsed.imaging_interval_days, spec.imaging_interval_days);
            assert_eq!(parsed.eot_offset_days, spec.eot_offset_days);
            assert_eq!(parsed.followup_months, spec.followup_months);
        }
    }

    #[test]
    fn round_trip_holds_across_seeds_and_styles() {
        for seed in [7u64, 2024] {
            let specs =
                generate_suite(&SuiteConfig { seed, ..SuiteConfig::default() }).unwrap();
            for spec in &specs {
                let parsed =
                    parse_rendered(&render_schedule(spec).unwrap().document).unwrap();
                assert_eq!(parsed.grid_arm_a_days, spec.intervention().visit_days_per_cycle);
                assert_eq!(parsed.grid_arm_b_days, spec.control().visit_days_per_cycle);
            }
        }
    }

    #[test]
    fn garbage_documents_are_rejected() {
        assert!(matches!(
            parse_rendered("<html><body>nothing here</body></html>"),
            Err(ParseDocError::Missing(_))
        ));
    }
}
