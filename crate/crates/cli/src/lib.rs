//! Command-line front end for `grasmle`.
//!
//! All artifacts are single JSON documents carrying a `"schema"` field.
//! Parallel tasks get independent seeds `master ⊕ splitmix64(index)` and
//! results are collected in task order, so output does not depend on the
//! number of threads.

pub mod commands;
pub mod error;
pub mod experiment;
pub mod formats;
pub mod seeds;

/// Reference parameter `σ₀` shipped with the crate. Its entries are rounded
/// and the matrix is slightly asymmetric; loading symmetrizes it.
pub const BUNDLED_SIGMA0: &str = include_str!("../data/sigma0.json");

/// Experiment configuration for the bundled parameter.
pub const BUNDLED_EXPERIMENT: &str = include_str!("../data/experiment.json");
