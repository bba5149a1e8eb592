//! Probabilistic models, exact oracles and tabular simulations of dual
//! learning and multi-step dual learning.
//!
//! The crate is organised bottom-up:
//!
//! - [`outcome_model`]: joint distributions of translator-correctness indicators.
//! - [`theory`]: closed-form accuracy predictions built on those tables.
//! - [`oracle`]: exact event-tree enumeration and seeded Monte Carlo twins.
//! - [`synth_lang`]: synthetic clustered language worlds and corpora.
//! - [`learner`]: tabular softmax translators and the training algorithms.
//! - [`metrics`]: exact accuracies and the empirical redistribution estimators.
//! - [`verify`]: randomised closed-form versus oracle sweeps and sign grids.
//! - [`cli`]: JSON-configured batch commands behind the `dualsim` binary.
//!
//! Data-parallel loops (Monte Carlo batches, random parameter sweeps, seed
//! fan-out) go through [`par`], which uses rayon when the `parallel` feature
//! is enabled and a plain sequential loop otherwise. Results are identical
//! either way.

pub mod cli;
pub mod error;
pub mod learner;
pub mod metrics;
pub mod oracle;
pub mod outcome_model;
pub mod par;
pub mod rng;
pub mod synth_lang;
pub mod theory;
pub mod verify;

pub use error::{Error, Result};

/// Absolute tolerance used for every probability equality check.
pub const PROB_TOL: f64 = 1e-12;
