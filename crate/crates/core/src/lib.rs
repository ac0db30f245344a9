//! Synthetic schedule-of-assessments benchmarking toolkit.
//!
//! The crate covers the full pipeline for measuring how well an extractor
//! recovers healthcare contact days from clinical-trial Schedule of
//! Assessments (SoA) documents:
//!
//! - [`schedule`] — domain model and deterministic arithmetic: cycle-to-calendar
//!   expansion and cumulative unique-day counting. This is the ground-truth
//!   oracle for everything else.
//! - [`synth`] — seeded generation of the 20-schedule benchmark suite and
//!   HTML rendering of each schedule in one of five visual styles.
//! - [`extract`] — pluggable extraction backends (remote model endpoint,
//!   deterministic oracle, noise-injecting mock) implementing the single-pass
//!   and two-stage protocols, with strict output parsing.
//! - [`consensus`] — position-based arm matching across runs, median
//!   aggregation, and cross-arm swap diagnostics.
//! - [`evaluate`] — accuracy metrics against ground truth, signed-error
//!   distribution tables, and IQR-based stability classification.
//!
//! All domain types are immutable values, all arithmetic is pure, and every
//! generator is seeded, so the whole pipeline is deterministic end to end.

pub mod consensus;
pub mod evaluate;
pub mod extract;
pub mod schedule;
pub mod synth;

#[cfg(test)]
pub(crate) mod testutil;
