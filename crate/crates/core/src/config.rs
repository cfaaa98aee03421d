//! Experiment configuration: one JSON document, every field optional.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{CorrPooling, DEFAULT_MIN_COUNT, DEFAULT_NUM_BINS};
use crate::models::{AdamConfig, ModelKind};
use crate::perturbation::PerturbMode;

/// Test-set size used for the CNN grid unless `full` is set.
pub const CNN_DEFAULT_TEST_SUBSET: usize = 2000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Directory holding the four MNIST IDX files (optionally gzipped).
    pub data_dir: PathBuf,
    /// Explicit IDX paths; each overrides the file found in `data_dir`.
    pub train_images: Option<PathBuf>,
    pub train_labels: Option<PathBuf>,
    pub test_images: Option<PathBuf>,
    pub test_labels: Option<PathBuf>,
    pub model: ModelKind,
    /// Load this checkpoint instead of training.
    pub checkpoint: Option<PathBuf>,
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub sigmas: Vec<f64>,
    pub lambdas: Vec<f64>,
    /// Perturbed predictions per sample.
    pub iters: usize,
    pub modes: Vec<PerturbMode>,
    pub seed: u64,
    pub num_bins: usize,
    pub min_count: usize,
    /// Fresh weight noise for every sample instead of `iters` shared models.
    pub independent_draws: bool,
    pub corr_pooling: CorrPooling,
    /// Seeded random subsets; `None` keeps the whole split.
    pub train_subset: Option<usize>,
    pub test_subset: Option<usize>,
    /// Ignore the CNN test-subset default.
    pub full: bool,
    pub out: PathBuf,
    /// Worker threads; `None` uses every core. Never changes results.
    pub jobs: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            data_dir: PathBuf::from("data/mnist"),
            train_images: None,
            train_labels: None,
            test_images: None,
            test_labels: None,
            model: ModelKind::Linear,
            checkpoint: None,
            epochs: 10,
            batch_size: 64,
            adam: AdamConfig::default(),
            sigmas: vec![0.1, 0.5, 1.0, 10.0],
            lambdas: vec![0.1, 0.5, 1.0, 2.0],
            iters: 10,
            modes: PerturbMode::ALL.to_vec(),
            seed: 0,
            num_bins: DEFAULT_NUM_BINS,
            min_count: DEFAULT_MIN_COUNT,
            independent_draws: false,
            corr_pooling: CorrPooling::Pooled,
            train_subset: None,
            test_subset: None,
            full: false,
            out: PathBuf::from("out"),
            jobs: None,
        }
    }
}

fn distinct<T: PartialEq>(v: &[T]) -> bool {
    v.iter().enumerate().all(|(i, x)| !v[..i].contains(x))
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config("config", e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    /// Test-subset size after applying the CNN default.
    pub fn effective_test_subset(&self) -> Option<usize> {
        match (self.test_subset, self.model, self.full) {
            (Some(n), _, _) => Some(n),
            (None, ModelKind::Cnn, false) => Some(CNN_DEFAULT_TEST_SUBSET),
            _ => None,
        }
    }

    /// Copy with every implicit default written out.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        c.test_subset = self.effective_test_subset();
        c
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: &str| Err(Error::config(field, msg));
        if self.sigmas.is_empty() {
            return bad("sigmas", "must not be empty");
        }
        if self.sigmas.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return bad("sigmas", "every sigma must be finite and >= 0");
        }
        if !distinct(&self.sigmas) {
            return bad("sigmas", "values must be distinct");
        }
        if self.lambdas.is_empty() {
            return bad("lambdas", "must not be empty");
        }
        if self.lambdas.iter().any(|l| !l.is_finite()) {
            return bad("lambdas", "every lambda must be finite");
        }
        if !distinct(&self.lambdas) {
            return bad("lambdas", "values must be distinct");
        }
        if self.modes.is_empty() {
            return bad("modes", "must not be empty");
        }
        if !distinct(&self.modes) {
            return bad("modes", "values must be distinct");
        }
        if self.iters == 0 {
            return bad("iters", "must be at least 1");
        }
        if self.epochs == 0 && self.checkpoint.is_none() {
            return bad("epochs", "must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size", "must be at least 1");
        }
        let a = &self.adam;
        if !(a.lr.is_finite() && a.lr > 0.0) {
            return bad("adam.lr", "must be positive");
        }
        if !(0.0..1.0).contains(&a.beta1) {
            return bad("adam.beta1", "must lie in [0, 1)");
        }
        if !(0.0..1.0).contains(&a.beta2) {
            return bad("adam.beta2", "must lie in [0, 1)");
        }
        if !(a.eps.is_finite() && a.eps > 0.0) {
            return bad("adam.eps", "must be positive");
        }
        if self.num_bins == 0 {
            return bad("num_bins", "must be at least 1");
        }
        if self.min_count == 0 {
            return bad("min_count", "must be at least 1");
        }
        if self.train_subset.is_some_and(|n| n < 1) {
            return bad("train_subset", "must be at least 1");
        }
        if self.test_subset.is_some_and(|n| n < 2) {
            return bad("test_subset", "must be at least 2");
        }
        if self.jobs == Some(0) {
            return bad("jobs", "must be at least 1");
        }
        Ok(())
    }
}
