//! `soa selfcheck` — built-in regression gates that must hold before any
//! experiment output is trusted. Prints one PASS/FAIL line per gate and
//! exits nonzero if any gate fails.
//!
//! Gates cover the statistics conventions the whole pipeline leans on (the
//! median-exclusive IQR and the median rules), the stability thresholds,
//! the benchmark composition and the oracle round trip. All of them run in
//! memory in a few seconds.

use std::path::PathBuf;

use anyhow::{bail, Result};

use soa_core::consensus::compute_consensus;
use soa_core::evaluate::{
    classify_stability, exact_match_rate, iqr, mae, median, within_k_rate, StabilityCategory,
    WITHIN_DAYS,
};
use soa_core::extract::{
    extract, Architecture, BackendConfig, ExtractRequest, OracleBackend, RunResult,
};
use soa_core::schedule::Complexity;
use soa_core::synth::{
    generate_suite, render_schedule, truth_from_spec, LoadedSchedule, SuiteConfig,
};

use crate::validate::build_validation;

type Gate = fn() -> Result<(), String>;

fn check<T: PartialEq + std::fmt::Debug>(label: &str, got: T, want: T) -> Result<(), String> {
    if got == want {
        Ok(())
    } else {
        Err(format!("{label}: got {got:?}, want {want:?}"))
    }
}

fn gate_iqr_examples() -> Result<(), String> {
    let cases: [(&[f64], f64); 4] = [
        (&[94.0, 473.0, 473.0, 540.0, 543.0], 258.0),
        (&[99.0, 105.0, 106.0, 106.0, 106.0], 4.0),
        (&[27.0, 53.0, 53.0, 53.0, 53.0], 13.0),
        (&[8.0, 8.0, 8.0, 8.0, 8.0], 0.0),
    ];
    for (values, want) in cases {
        check(&format!("iqr{values:?}"), iqr(values), Some(want))?;
    }
    Ok(())
}

fn gate_median_rules() -> Result<(), String> {
    check("odd median", median(&[10.0, 12.0, 11.0]), Some(11.0))?;
    check("even median", median(&[10.0, 20.0]), Some(15.0))?;
    // A single dissenting run never moves a 3-run consensus.
    check("median {a,a,b}", median(&[5.0, 5.0, 9.0]), Some(5.0))?;
    Ok(())
}

fn gate_stability_rule() -> Result<(), String> {
    for a in 0..=10u32 {
        for b in 0..=10u32 {
            for c in 0..=10u32 {
                let range = a.max(b).max(c) - a.min(b).min(c);
                let category = classify_stability(&[a, b, c])
                    .ok_or_else(|| "3 runs must classify".to_string())?;
                check(
                    &format!("acceptable({a},{b},{c})"),
                    category != StabilityCategory::HighVariance,
                    range <= 3,
                )?;
                check(
                    &format!("perfect({a},{b},{c})"),
                    category == StabilityCategory::Perfect,
                    range == 0,
                )?;
            }
        }
    }
    Ok(())
}

fn gate_suite_composition() -> Result<(), String> {
    let specs = generate_suite(&SuiteConfig::default()).map_err(|e| e.to_string())?;
    check("schedules", specs.len(), 20)?;
    let count = |c: Complexity| specs.iter().filter(|s| s.complexity == c).count();
    check("simple", count(Complexity::Simple), 5)?;
    check("moderate", count(Complexity::Moderate), 10)?;
    check("complex", count(Complexity::Complex), 5)?;
    let arms: usize = specs.iter().map(|s| s.arms.len()).sum();
    check("arms", arms, 40)?;
    check("comparisons", arms * 6, 240)?;
    Ok(())
}

fn gate_oracle_fidelity() -> Result<(), String> {
    let specs = generate_suite(&SuiteConfig::default()).map_err(|e| e.to_string())?;
    let backend = OracleBackend::from_specs(specs.clone());
    let config = BackendConfig { backoff_base_ms: 0, ..BackendConfig::default() };

    let mut schedules = Vec::new();
    let mut runs: Vec<RunResult> = Vec::new();
    for spec in specs {
        let document = render_schedule(&spec).map_err(|e| e.to_string())?.document;
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
            .map_err(|e| e.to_string())?;
            runs.push(outcome.result);
        }
        let truth = truth_from_spec(&spec).map_err(|e| e.to_string())?;
        schedules.push(LoadedSchedule { spec, truth, dir: PathBuf::new() });
    }

    let consensus = compute_consensus(&runs);
    let records =
        build_validation(&schedules, &consensus, false).map_err(|e| e.to_string())?;
    check("comparisons", records.len(), 240)?;
    check("exact", exact_match_rate(&records).map_err(|e| e.to_string())?, 1.0)?;
    check(
        "within_3",
        within_k_rate(&records, WITHIN_DAYS).map_err(|e| e.to_string())?,
        1.0,
    )?;
    check("mae", mae(&records).map_err(|e| e.to_string())?, 0.0)?;
    Ok(())
}

pub fn run() -> Result<()> {
    let gates: [(&str, Gate); 5] = [
        ("iqr worked examples", gate_iqr_examples),
        ("median rules", gate_median_rules),
        ("stability thresholds", gate_stability_rule),
        ("suite composition", gate_suite_composition),
        ("oracle fidelity", gate_oracle_fidelity),
    ];

    let mut failures = 0;
    for (name, gate) in gates {
        match gate() {
            Ok(()) => println!("SELFCHECK {name}: PASS"),
            Err(message) => {
                failures += 1;
                println!("SELFCHECK {name}: FAIL ({message})");
            }
        }
    }
    if failures > 0 {
        bail!("{failures} selfcheck gate(s) failed");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_gate_passes() {
        run().unwrap();
    }
}
