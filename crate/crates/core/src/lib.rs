//! Perturbation-based uncertainty quantification for small image classifiers.
//!
//! Train a classifier, inject Gaussian noise into its weights or its inputs,
//! sample repeated argmax predictions, and summarize them with the entropy of
//! the prediction distribution, the perturbation index (accuracy drop) and the
//! perturbation stability index (perturbed accuracy penalized by the
//! correlation between correctness and entropy).

pub mod config;
pub mod dataset;
pub mod error;
pub mod exec;
pub mod experiment;
pub mod math;
pub mod metrics;
pub mod models;
pub mod perturbation;
pub mod plot;
pub mod rng;

pub use error::{Error, Result};
pub use exec::Exec;
