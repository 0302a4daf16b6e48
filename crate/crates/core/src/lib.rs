//! Audit toolkit for pretrial risk assessment instruments under differential
//! enforcement.
//!
//! The library ingests arrest-record cohorts, computes four risk scores per
//! individual, augments the records with synthetic unobserved offenses drawn
//! from group-level arrest-rate estimates, and measures how score disparities
//! between matched demographic groups change once unobserved offending is
//! accounted for. A separate module simulates the downstream enforcement
//! pipeline (crime, incident, arrest, conviction, incarceration) and the
//! feedback loop created by prediction-driven resource allocation.
//!
//! Modules mirror the processing stages:
//!
//! - [`taxonomy`] / [`cohort`]: offense categories, record ingestion, and
//!   per-individual criminal-history features at a reference date.
//! - [`scores`]: the four instruments and score normalization.
//! - [`rates`]: group-level arrest-rate and reporting-propensity estimation.
//! - [`augment`]: synthetic unobserved-offense assignment.
//! - [`matching`]: coarsened exact matching and average-effect estimation.
//! - [`analysis`]: parameter sweeps, derived metrics, and report emission.
//! - [`pipeline`]: stage-transition and feedback-loop simulation.
//! - [`synth`]: synthetic ground-truth population generation.
//! - [`runner`]: end-to-end commands shared by the CLI and integration tests.
//!
//! Every stochastic step derives its stream from caller-supplied seeds; a
//! fixed configuration reproduces byte-identical outputs.

pub mod analysis;
pub mod augment;
pub mod cohort;
pub mod error;
pub mod feedback;
pub mod matching;
pub mod pipeline;
pub mod rates;
pub mod runner;
pub mod scores;
pub mod seed;
pub mod synth;
pub mod taxonomy;

pub use error::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
