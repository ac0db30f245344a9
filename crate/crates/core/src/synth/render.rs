//! Rendering of schedule specs as standalone HTML documents.
//!
//! The rendered document is the only artifact extraction backends may read:
//! a schedule-of-assessments grid (assessment rows by visit columns), an arm
//! description block, a marker legend and a footnote block. Visual layout
//! varies with `style_id` (borders, fonts, header orientation, marker glyphs,
//! footnote placement) but visit semantics are identical across styles.
//!
//! Cycles 1 through 3 are rendered as individual columns; cycles beyond the
//! third collapse into one grouped range column per visit offset (for
//! example `C4-C8 (D1)`), so any schedule longer than three cycles exercises
//! the grouped-column expansion hazard.

use std::fmt::Write as _;

use crate::schedule::{ArmRole, ScheduleSpec, SpecError};

/// A schedule rendered as a standalone HTML document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedSchedule {
    pub schedule_id: String,
    pub style_id: u8,
    pub document: String,
}

/// Visual knobs that differ between the five styles.
struct StyleTheme {
    font: &'static str,
    cell_border: &'static str,
    vertical_headers: bool,
    /// Superscript glyphs for (intervention, control) arm-specific cells.
    markers: (&'static str, &'static str),
    footnotes_on_top: bool,
    zebra_rows: bool,
}

impl StyleTheme {
    fn for_style(style_id: u8) -> StyleTheme {
        match style_id {
            1 => StyleTheme {
                font: "Arial, sans-serif",
                cell_border: "1px solid #333",
                vertical_headers: false,
                markers: ("A", "B"),
                footnotes_on_top: false,
                zebra_rows: false,
            },
            2 => StyleTheme {
                font: "Georgia, serif",
                cell_border: "3px double #555",
                vertical_headers: false,
                markers: ("a", "b"),
                footnotes_on_top: true,
                zebra_rows: true,
            },
            3 => StyleTheme {
                font: "'Courier New', monospace",
                cell_border: "1px dashed #444",
                vertical_headers: true,
                markers: ("*", "&#8224;"),
                footnotes_on_top: false,
                zebra_rows: false,
            },
            4 => StyleTheme {
                font: "Helvetica, sans-serif",
                cell_border: "1px solid #999",
                vertical_headers: false,
                markers: ("1", "2"),
                footnotes_on_top: true,
                zebra_rows: true,
            },
            _ => StyleTheme {
                font: "'Times New Roman', serif",
                cell_border: "2px solid #000",
                vertical_headers: true,
                markers: ("&#945;", "&#946;"),
                footnotes_on_top: false,
                zebra_rows: false,
            },
        }
    }
}

/// One visit column of the SoA grid.
enum Column {
    Screening { day: i32 },
    CycleDay { cycle: u32, offset: u32 },
    /// Cycles `from..=to`, one column per offset.
    Grouped { from: u32, to: u32, offset: u32 },
    Eot,
    Followup { month: u32 },
}

impl Column {
    fn header(&self) -> String {
        match self {
            Column::Screening { day } => format!("Screening D{day}"),
            Column::CycleDay { cycle, offset } => format!("C{cycle}D{offset}"),
            Column::Grouped { from, to, offset } => format!("C{from}-C{to} (D{offset})"),
            Column::Eot => "EOT".to_string(),
            Column::Followup { month } => format!("FU M{month}"),
        }
    }
}

/// How a grid cell is marked.
#[derive(Clone, Copy, PartialEq, Eq)]
enum CellMark {
    Blank,
    /// Required for all arms: plain `X`.
    Both,
    /// Intervention arm only: `X` with the arm-A superscript glyph.
    ArmA,
    /// Control arm only: `X` with the arm-B superscript glyph.
    ArmB,
}

/// Renders a schedule spec as a styled HTML document.
pub fn render_schedule(spec: &ScheduleSpec) -> Result<RenderedSchedule, SpecError> {
    spec.validate()?;
    let cycles = spec.total_cycles()?;
    let theme = StyleTheme::for_style(spec.style_id);

    let intervention = spec.intervention();
    let control = spec.control();
    let int_days = &intervention.visit_days_per_cycle;
    let ctl_days = &control.visit_days_per_cycle;
    let union: Vec<u32> = int_days.union(ctl_days).copied().collect();
    let first_offset = union[0];

    let mark_visit = |offset: u32| match (int_days.contains(&offset), ctl_days.contains(&offset))
    {
        (true, true) => CellMark::Both,
        (true, false) => CellMark::ArmA,
        (false, true) => CellMark::ArmB,
        (false, false) => CellMark::Blank,
    };

    // Column roster: screening visits, cycles 1-3 individually, the grouped
    // remainder, end of treatment, then follow-ups.
    let mut columns = Vec::new();
    for &day in &spec.screening_days {
        columns.push(Column::Screening { day });
    }
    for cycle in 1..=cycles.min(3) {
        for &offset in &union {
            columns.push(Column::CycleDay { cycle, offset });
        }
    }
    if cycles > 3 {
        for &offset in &union {
            columns.push(Column::Grouped { from: 4, to: cycles, offset });
        }
    }
    columns.push(Column::Eot);
    for &month in &spec.followup_months {
        columns.push(Column::Followup { month });
    }

    // Assessment rows: label, optional footnote letter, and the marking rule.
    type Rule<'a> = Box<dyn Fn(&Column) -> CellMark + 'a>;
    let treatment_rule = |extra: CellMark| -> Rule<'_> {
        Box::new(move |col| match col {
            Column::Screening { .. } => extra,
            Column::CycleDay { offset, .. } | Column::Grouped { offset, .. } => {
                mark_visit(*offset)
            }
            Column::Eot => CellMark::Both,
            Column::Followup { .. } => CellMark::Blank,
        })
    };
    let rows: Vec<(String, Option<char>, Rule<'_>)> = vec![
        (
            "Informed consent".into(),
            None,
            Box::new(|col| match col {
                Column::Screening { .. } => CellMark::Both,
                _ => CellMark::Blank,
            }),
        ),
        (
            "Medical history".into(),
            None,
            Box::new(|col| match col {
                Column::Screening { .. } => CellMark::Both,
                _ => CellMark::Blank,
            }),
        ),
        (
            "Physical examination".into(),
            None,
            Box::new(|col| match col {
                Column::Screening { .. } | Column::Eot | Column::Followup { .. } => {
                    CellMark::Both
                }
                Column::CycleDay { offset, .. } | Column::Grouped { offset, .. } => {
                    mark_visit(*offset)
                }
            }),
        ),
        ("Vital signs".into(), None, treatment_rule(CellMark::Both)),
        (
            "ECOG performance status".into(),
            None,
            Box::new(move |col| match col {
                Column::Screening { .. } | Column::Eot => CellMark::Both,
                Column::CycleDay { offset, .. } | Column::Grouped { offset, .. }
                    if *offset == first_offset =>
                {
                    mark_visit(*offset)
                }
                _ => CellMark::Blank,
            }),
        ),
        ("Hematology panel".into(), None, treatment_rule(CellMark::Both)),
        ("Serum chemistry".into(), None, treatment_rule(CellMark::Both)),
        (
            "Pregnancy test".into(),
            None,
            Box::new(|col| match col {
                Column::Screening { .. } => CellMark::Both,
                _ => CellMark::Blank,
            }),
        ),
        (
            "12-lead ECG".into(),
            None,
            Box::new(move |col| match col {
                Column::Screening { .. } => CellMark::Both,
                Column::CycleDay { cycle: 1, offset } if *offset == first_offset => {
                    mark_visit(*offset)
                }
                _ => CellMark::Blank,
            }),
        ),
        (
            "Study treatment administration".into(),
            None,
            Box::new(|col| match col {
                Column::CycleDay { offset, .. } | Column::Grouped { offset, .. } => {
                    mark_visit(*offset)
                }
                _ => CellMark::Blank,
            }),
        ),
        (
            "Tumor imaging (CT/MRI)".into(),
            Some('a'),
            Box::new(|col| match col {
                Column::Followup { .. } => CellMark::Both,
                _ => CellMark::Blank,
            }),
        ),
        (
            "Adverse event review".into(),
            None,
            Box::new(|col| match col {
                Column::Screening { .. } => CellMark::Blank,
                Column::CycleDay { offset, .. } | Column::Grouped { offset, .. } => {
                    mark_visit(*offset)
                }
                Column::Eot | Column::Followup { .. } => CellMark::Both,
            }),
        ),
        (
            spec.disease_category.specific_assessment().to_string(),
            None,
            Box::new(|col| match col {
                Column::Screening { .. } | Column::Followup { .. } => CellMark::Both,
                _ => CellMark::Blank,
            }),
        ),
    ];

    let mut doc = String::new();
    let _ = write!(
        doc,
        "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n\
         <title>{id} Schedule of Assessments</title>\n<style>\n\
         body {{ font-family: {font}; margin: 24px; }}\n\
         table {{ border-collapse: collapse; }}\n\
         th, td {{ border: {border}; padding: 4px 8px; text-align: center; }}\n\
         td.assessment {{ text-align: left; }}\n",
        id = spec.schedule_id,
        font = theme.font,
        border = theme.cell_border,
    );
    if theme.vertical_headers {
        doc.push_str(
            "th.visit span { writing-mode: vertical-rl; transform: rotate(180deg); }\n",
        );
    }
    if theme.zebra_rows {
        doc.push_str("tbody tr:nth-child(even) td { background: #f2f2f2; }\n");
    }
    doc.push_str(".legend, .footnotes { margin-top: 12px; font-size: 0.9em; }\n</style>\n</head>\n<body>\n");

    let _ = write!(
        doc,
        "<h1>Protocol {id} &mdash; Schedule of Assessments</h1>\n\
         <p class=\"subtitle\">Phase III randomized trial &mdash; {disease} oncology; {modality}.</p>\n",
        id = spec.schedule_id,
        disease = spec.disease_category.display_name(),
        modality = spec.modality.display_name(),
    );

    // Arm description block; the fixed wording doubles as a parseable record
    // of each arm's per-cycle visit pattern.
    doc.push_str("<div class=\"arms\">\n");
    for arm in &spec.arms {
        let (letter, role_word) = match arm.role {
            ArmRole::Intervention => ("A", "Investigational"),
            ArmRole::Control => ("B", "Control"),
        };
        let days = join_days(arm.visit_days_per_cycle.iter());
        let _ = writeln!(
            doc,
            "<p>Arm {letter} ({role_word}): {label}. Visits on day(s) {days} of each cycle.</p>",
            label = arm.label,
        );
    }
    doc.push_str("</div>\n");

    let footnotes = footnote_block(spec, cycles);
    if theme.footnotes_on_top {
        doc.push_str(&footnotes);
    }

    doc.push_str("<table>\n<thead>\n<tr><th>Assessment</th>");
    for col in &columns {
        if theme.vertical_headers {
            let _ = write!(doc, "<th class=\"visit\"><span>{}</span></th>", col.header());
        } else {
            let _ = write!(doc, "<th class=\"visit\">{}</th>", col.header());
        }
    }
    doc.push_str("</tr>\n</thead>\n<tbody>\n");

    for (label, footnote, rule) in &rows {
        doc.push_str("<tr><td class=\"assessment\">");
        doc.push_str(label);
        if let Some(letter) = footnote {
            let _ = write!(doc, "<sup>{letter}</sup>");
        }
        doc.push_str("</td>");
        for col in &columns {
            match rule(col) {
                CellMark::Blank => doc.push_str("<td></td>"),
                CellMark::Both => doc.push_str("<td>X</td>"),
                CellMark::ArmA => {
                    let _ = write!(doc, "<td>X<sup>{}</sup></td>", theme.markers.0);
                }
                CellMark::ArmB => {
                    let _ = write!(doc, "<td>X<sup>{}</sup></td>", theme.markers.1);
                }
            }
        }
        doc.push_str("</tr>\n");
    }
    doc.push_str("</tbody>\n</table>\n");

    let _ = writeln!(
        doc,
        "<div class=\"legend\"><p>X = required for all arms; X<sup>{a}</sup> = Arm A only; \
         X<sup>{b}</sup> = Arm B only.</p></div>",
        a = theme.markers.0,
        b = theme.markers.1,
    );

    if !theme.footnotes_on_top {
        doc.push_str(&footnotes);
    }
    doc.push_str("</body>\n</html>\n");

    Ok(RenderedSchedule {
        schedule_id: spec.schedule_id.clone(),
        style_id: spec.style_id,
        document: doc,
    })
}

/// The footnote block, in a fixed sentence grammar shared with the
/// reference parser.
fn footnote_block(spec: &ScheduleSpec, cycles: u32) -> String {
    let mut block = String::from("<div class=\"footnotes\">\n");
    let _ = writeln!(
        block,
        "<p>Treatment duration: {months} months ({cycles} cycles of {len} days).</p>",
        months = spec.treatment_duration_months,
        len = spec.cycle_length_days,
    );
    let _ = writeln!(
        block,
        "<p>Screening visits on day(s) {} relative to C1D1.</p>",
        join_days(spec.screening_days.iter()),
    );
    let _ = writeln!(
        block,
        "<p>a. Imaging every {} days during the treatment phase; also performed at follow-up \
         visits.</p>",
        spec.imaging_interval_days,
    );
    let _ = writeln!(
        block,
        "<p>End-of-treatment (EOT) visit {} days after the last treatment visit.</p>",
        spec.eot_offset_days,
    );
    if !spec.followup_months.is_empty() {
        let months = join_days(spec.followup_months.iter());
        let days = spec
            .followup_months
            .iter()
            .map(|m| format!("day {}", m * 30))
            .collect::<Vec<_>>()
            .join(", ");
        let _ = writeln!(
            block,
            "<p>Follow-up visits at month(s) {months} ({days}) after treatment start.</p>",
        );
    }
    block.push_str("</div>\n");
    block
}

fn join_days<T: std::fmt::Display>(days: impl Iterator<Item = T>) -> String {
    days.map(|d| d.to_string()).collect::<Vec<_>>().join(", ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_suite, SuiteConfig};

    fn sample_spec() -> ScheduleSpec {
        generate_suite(&SuiteConfig::default()).unwrap().into_iter().next().unwrap()
    }

    #[test]
    fn long_schedules_render_a_grouped_column() {
        let specs = generate_suite(&SuiteConfig::default()).unwrap();
        let long = specs.iter().find(|s| s.total_cycles().unwrap() > 3).unwrap();
        let rendered = render_schedule(long).unwrap();
        let header = format!("C4-C{}", long.total_cycles().unwrap());
        assert!(rendered.document.contains(&header));
    }

    #[test]
    fn short_schedules_render_no_grouped_column() {
        let mut spec = sample_spec();
        spec.cycle_length_days = 35;
        spec.treatment_duration_months = 3; // floor(90/35) = 2 cycles
        for arm in &mut spec.arms {
            arm.visit_days_per_cycle =
                arm.visit_days_per_cycle.iter().map(|&d| d.min(35)).collect();
        }
        let rendered = render_schedule(&spec).unwrap();
        assert!(!rendered.document.contains("-C"));
        assert!(rendered.document.contains("C2D"));
    }

    #[test]
    fn styles_change_markup_but_not_semantics() {
        let spec = sample_spec();
        let mut docs = Vec::new();
        for style in 1..=5u8 {
            let mut s = spec.clone();
            s.style_id = style;
            docs.push(render_schedule(&s).unwrap().document);
        }
        for pair in docs.windows(2) {
            assert_ne!(pair[0], pair[1]);
        }
        // Shared content is style-invariant.
        for doc in &docs {
            assert!(doc.contains("Treatment duration:"));
            assert!(doc.contains("Study treatment administration"));
        }
    }

    #[test]
    fn legend_names_both_arms() {
        for style in 1..=5u8 {
            let mut spec = sample_spec();
            spec.style_id = style;
            let doc = render_schedule(&spec).unwrap().document;
            assert!(doc.contains("= Arm A only"));
            assert!(doc.contains("= Arm B only"));
            assert!(doc.contains("Arm A (Investigational):"));
            assert!(doc.contains("Arm B (Control):"));
        }
    }

    #[test]
    fn arm_specific_cells_carry_superscripts() {
        // Force differing visit patterns so arm-specific cells must exist.
        let mut spec = sample_spec();
        spec.complexity = crate::schedule::Complexity::Moderate;
        spec.cycle_length_days = 21;
        spec.arms[0].visit_days_per_cycle = [1, 8].into_iter().collect();
        spec.arms[1].visit_days_per_cycle = [1, 15].into_iter().collect();
        let doc = render_schedule(&spec).unwrap().document;
        assert!(doc.contains("X<sup>A</sup>") || spec.style_id != 1);
        let theme_a = ["A", "a", "*", "1", "&#945;"][spec.style_id as usize - 1];
        let theme_b = ["B", "b", "&#8224;", "2", "&#946;"][spec.style_id as usize - 1];
        assert!(doc.contains(&format!("X<sup>{theme_a}</sup>")));
        assert!(doc.contains(&format!("X<sup>{theme_b}</sup>")));
    }

    #[test]
    fn every_suite_document_renders(){
        for spec in generate_suite(&SuiteConfig::default()).unwrap() {
            let rendered = render_schedule(&spec).unwrap();
            assert!(rendered.document.contains("<table>"));
            assert!(rendered.document.contains("EOT"));
            assert!(rendered.document.contains(spec.disease_category.specific_assessment()));
        }
    }
}
