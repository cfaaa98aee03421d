//! The on-disk pipeline: train, perturb, summarize.
//!
//! ```text
//! <out>/config.resolved.json
//! <out>/model.ckpt  training.csv  alpha.json
//! <out>/logs/sigma_<s>_<mode>.csv
//! <out>/sigma_<s>_<mode>/{samples,bins,eac_class}.csv  eac_scatter.svg  eac_bars.svg
//! <out>/metrics.csv
//! ```
//!
//! Every stage reads only the files of the previous one, so each can run on
//! its own.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::dataset::{locate, load_idx_pair, LabeledDataset, MNIST_CLASSES};
use crate::dataset::{MNIST_TEST_IMAGES, MNIST_TEST_LABELS, MNIST_TRAIN_IMAGES, MNIST_TRAIN_LABELS};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::metrics::{self, CorrPooling, MetricRow};
use crate::models::{self, load_checkpoint, save_checkpoint, Architecture, EpochStats, Model, ModelKind, TrainOptions};
use crate::perturbation::{load_log, run_perturbed_pass, save_log, PassConfig, PerturbMode, PredictionLog};
use crate::plot;
use crate::rng::{purpose, RngStream};

pub const RESOLVED_CONFIG: &str = "config.resolved.json";
pub const CHECKPOINT: &str = "model.ckpt";
pub const TRAINING_CSV: &str = "training.csv";
pub const ALPHA_JSON: &str = "alpha.json";
pub const LOGS_DIR: &str = "logs";
pub const METRICS_CSV: &str = "metrics.csv";

/// Directory/file stem of one grid point, e.g. `sigma_0.5_input`.
pub fn grid_name(sigma: f64, mode: PerturbMode) -> String {
    format!("sigma_{sigma}_{mode}")
}

/// Unperturbed test accuracy, kept next to the checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaRecord {
    pub alpha: f64,
    pub correct: usize,
    pub total: usize,
    pub model: ModelKind,
}

impl AlphaRecord {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("alpha serializes") + "\n";
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// What `run` reports after writing its artifacts.
#[derive(Clone, Debug)]
pub struct Summary {
    pub out: PathBuf,
    pub alpha: f64,
    pub test_samples: usize,
    pub history: Vec<EpochStats>,
    pub rows: Vec<MetricRow>,
}

impl Summary {
    /// Plain-text table for standard output.
    pub fn table(&self) -> String {
        let mut s = format!("alpha = {:.4} on {} test samples\n", self.alpha, self.test_samples);
        s.push_str(&format!("{:>8} {:>6} {:>8} {:>8} {:>8}", "sigma", "mode", "alpha_s", "pi", "corr"));
        if let Some(r) = self.rows.first() {
            for (l, _) in &r.psi {
                s.push_str(&format!(" {:>9}", format!("psi_{l}")));
            }
        }
        s.push('\n');
        for r in &self.rows {
            s.push_str(&format!(
                "{:>8} {:>6} {:>8.4} {:>8.4} {:>8.4}",
                r.sigma, r.mode, r.alpha_sigma, r.pi, r.corr
            ));
            for (_, v) in &r.psi {
                s.push_str(&format!(" {v:>9.4}"));
            }
            s.push('\n');
        }
        s
    }
}

fn mkdir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

/// Creates `out`, refusing a non-empty directory unless `force`.
pub fn prepare_output(out: &Path, force: bool) -> Result<()> {
    if let Ok(mut entries) = fs::read_dir(out) {
        if entries.next().is_some() && !force {
            return Err(Error::config(
                "out",
                format!("{} is not empty; pass --force to overwrite", out.display()),
            ));
        }
    } else if out.exists() {
        return Err(Error::config("out", format!("{} is not a directory", out.display())));
    }
    mkdir(out)
}

/// Creates `out` for a single stage, refusing to overwrite any of `targets`
/// unless `force`. Stages may share a directory.
pub fn prepare_stage_output(out: &Path, targets: &[&str], force: bool) -> Result<()> {
    if !force {
        if let Some(t) = targets.iter().find(|t| out.join(t).exists()) {
            return Err(Error::config(
                "out",
                format!("{} already exists; pass --force to overwrite", out.join(t).display()),
            ));
        }
    }
    mkdir(out)
}

/// Loads both splits and applies the seeded subsets.
pub fn load_data(cfg: &ExperimentConfig) -> Result<(LabeledDataset, LabeledDataset)> {
    let pick = |explicit: &Option<PathBuf>, name: &str| match explicit {
        Some(p) => Ok(p.clone()),
        None => locate(&cfg.data_dir, name),
    };
    let train = load_idx_pair(
        &pick(&cfg.train_images, MNIST_TRAIN_IMAGES)?,
        &pick(&cfg.train_labels, MNIST_TRAIN_LABELS)?,
        MNIST_CLASSES,
    )?;
    let test = load_idx_pair(
        &pick(&cfg.test_images, MNIST_TEST_IMAGES)?,
        &pick(&cfg.test_labels, MNIST_TEST_LABELS)?,
        MNIST_CLASSES,
    )?;
    let root = RngStream::new(cfg.seed);
    let subset = |data: LabeledDataset, size: Option<usize>, id: u64, field: &str| match size {
        Some(n) if n < data.len() => data.random_subset(n, &root.derive(&[purpose::SUBSET, id])),
        Some(n) if n > data.len() => Err(Error::config(
            field,
            format!("{n} exceeds the {} available samples", data.len()),
        )),
        _ => Ok(data),
    };
    Ok((
        subset(train, cfg.train_subset, 0, "train_subset")?,
        subset(test, cfg.effective_test_subset(), 1, "test_subset")?,
    ))
}

pub fn architecture_for(kind: ModelKind, data: &LabeledDataset) -> Result<Architecture> {
    let (rows, cols) = data.image_shape();
    let classes = data.num_classes();
    Ok(match kind {
        ModelKind::Linear => Architecture::linear(rows * cols, classes),
        ModelKind::Mlp => Architecture::mlp(rows * cols, 128, classes),
        ModelKind::Cnn if rows == cols => Architecture::tiny_cnn(rows, classes),
        ModelKind::Cnn => {
            return Err(Error::config("model", format!("cnn needs square images, got {rows}x{cols}")))
        }
    })
}

/// Trains (or loads `cfg.checkpoint`), measures alpha on `test`, and writes
/// the checkpoint, training history and alpha record into `out`.
pub fn train_stage(
    cfg: &ExperimentConfig,
    train: &LabeledDataset,
    test: &LabeledDataset,
    out: &Path,
) -> Result<(Model, AlphaRecord, Vec<EpochStats>)> {
    let exec = Exec::default();
    let arch = architecture_for(cfg.model, train)?;
    let (model, history) = match &cfg.checkpoint {
        Some(path) => (load_checkpoint(path, Some(&arch))?, Vec::new()),
        None => {
            let root = RngStream::new(cfg.seed);
            let init = Model::init(arch, &root.child(purpose::INIT))?;
            let opts = TrainOptions {
                epochs: cfg.epochs,
                batch_size: cfg.batch_size,
                adam: cfg.adam,
                exec,
            };
            models::train(&init, train, &opts, &root.child(purpose::SHUFFLE))?
        }
    };
    save_checkpoint(&model, &out.join(CHECKPOINT))?;
    let mut w = csv::Writer::from_writer(create(&out.join(TRAINING_CSV))?);
    for h in &history {
        w.serialize(h)?;
    }
    w.flush().map_err(|e| Error::io(out.join(TRAINING_CSV), e))?;
    let alpha = alpha_record(&model, test, exec)?;
    alpha.save(&out.join(ALPHA_JSON))?;
    log::info!("alpha = {:.4} ({}/{})", alpha.alpha, alpha.correct, alpha.total);
    Ok((model, alpha, history))
}

pub fn alpha_record(model: &Model, test: &LabeledDataset, exec: Exec) -> Result<AlphaRecord> {
    let correct = models::correct_count(model, test, exec)?;
    Ok(AlphaRecord {
        alpha: correct as f64 / test.len() as f64,
        correct,
        total: test.len(),
        model: model.architecture().kind(),
    })
}

/// One prediction log per `(sigma, mode)`, sigma-major. Grid points run
/// concurrently (bounded by `cfg.jobs`); results come back in grid order.
pub fn perturb_stage(
    cfg: &ExperimentConfig,
    model: &Model,
    test: &LabeledDataset,
    out: Option<&Path>,
) -> Result<Vec<PredictionLog>> {
    let exec = Exec::default();
    let grid: Vec<(f64, PerturbMode)> = cfg
        .sigmas
        .iter()
        .flat_map(|&s| cfg.modes.iter().map(move |&m| (s, m)))
        .collect();
    let root = RngStream::new(cfg.seed);
    let logs = exec.with_jobs(cfg.jobs.unwrap_or(0), || {
        exec.map_range(grid.len(), |g| {
            let (sigma, mode) = grid[g];
            let pass = PassConfig {
                independent_draws: cfg.independent_draws,
                exec,
                model_id: model.architecture().kind().to_string(),
                ..PassConfig::new(sigma, mode, cfg.iters)
            };
            log::info!("perturbing: sigma {sigma}, mode {mode}");
            run_perturbed_pass(model, test, &pass, &root)
        })
    });
    let logs: Vec<PredictionLog> = logs.into_iter().collect::<Result<_>>()?;
    if let Some(out) = out {
        let dir = out.join(LOGS_DIR);
        mkdir(&dir)?;
        for log in &logs {
            save_log(log, &dir.join(format!("{}.csv", grid_name(log.meta.sigma, log.meta.mode))))?;
        }
    }
    Ok(logs)
}

/// Every `*.csv` log in `dir`, ordered by sigma then mode.
pub fn load_logs_dir(dir: &Path) -> Result<Vec<PredictionLog>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "csv") {
            paths.push(path);
        }
    }
    paths.sort();
    let mut logs = paths.iter().map(|p| load_log(p)).collect::<Result<Vec<_>>>()?;
    if logs.is_empty() {
        return Err(Error::invalid(format!("no prediction logs in {}", dir.display())));
    }
    let mode_rank = |m: PerturbMode| PerturbMode::ALL.iter().position(|&x| x == m);
    logs.sort_by(|a, b| {
        a.meta
            .sigma
            .total_cmp(&b.meta.sigma)
            .then(mode_rank(a.meta.mode).cmp(&mode_rank(b.meta.mode)))
    });
    Ok(logs)
}

/// Settings the metrics stage needs beyond the logs themselves.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsOptions {
    pub lambdas: Vec<f64>,
    pub num_bins: usize,
    pub min_count: usize,
    pub pooling: CorrPooling,
}

impl From<&ExperimentConfig> for MetricsOptions {
    fn from(cfg: &ExperimentConfig) -> Self {
        MetricsOptions {
            lambdas: cfg.lambdas.clone(),
            num_bins: cfg.num_bins,
            min_count: cfg.min_count,
            pooling: cfg.corr_pooling,
        }
    }
}

/// Writes per-grid-point CSVs and SVGs plus `metrics.csv`; rows follow `logs`.
pub fn metrics_stage(
    logs: &[PredictionLog],
    alpha: f64,
    opts: &MetricsOptions,
    out: &Path,
) -> Result<Vec<MetricRow>> {
    let mut rows = Vec::with_capacity(logs.len());
    for log in logs {
        let (sigma, mode) = (log.meta.sigma, log.meta.mode);
        let classes = log.meta.num_classes;
        let stats = metrics::sample_stats(log)?;
        let (alpha_sigma, corr) = metrics::alpha_and_corr(&stats, opts.pooling)?;
        let row = MetricRow::new(sigma, mode, alpha, alpha_sigma, corr, &opts.lambdas);
        row.check()?;

        let bins = metrics::binned_conditional_accuracy(&stats, classes, opts.num_bins, opts.min_count)?;
        let line = metrics::regression_line(&bins);
        let per_class = metrics::per_class_eac(&stats, classes)?;

        let name = grid_name(sigma, mode);
        let dir = out.join(&name);
        mkdir(&dir)?;
        metrics::write_samples_csv(&stats, create(&dir.join("samples.csv"))?)?;
        metrics::write_bins_csv(&bins, create(&dir.join("bins.csv"))?)?;
        metrics::write_class_csv(&per_class, create(&dir.join("eac_class.csv"))?)?;
        let title = format!("{} model, {mode} noise, sigma = {sigma}", log.meta.model);
        plot::emit_eac_scatter(&stats, &bins, line, classes, &title, &dir.join("eac_scatter.svg"))?;
        plot::emit_eac_bars(&per_class, &title, &dir.join("eac_bars.svg"))?;
        rows.push(row);
    }
    metrics::write_metrics_csv(&rows, create(&out.join(METRICS_CSV))?)?;
    Ok(rows)
}

/// The full pipeline into `cfg.out`.
pub fn run_experiment(cfg: &ExperimentConfig, force: bool) -> Result<Summary> {
    cfg.validate()?;
    let resolved = cfg.resolved();
    prepare_output(&cfg.out, force)?;
    fs::write(cfg.out.join(RESOLVED_CONFIG), resolved.to_json())
        .map_err(|e| Error::io(cfg.out.join(RESOLVED_CONFIG), e))?;
    let (train, test) = load_data(&resolved)?;
    let (model, alpha, history) = train_stage(&resolved, &train, &test, &cfg.out)?;
    let logs = perturb_stage(&resolved, &model, &test, Some(&cfg.out))?;
    let rows = metrics_stage(&logs, alpha.alpha, &MetricsOptions::from(&resolved), &cfg.out)?;
    Ok(Summary {
        out: cfg.out.clone(),
        alpha: alpha.alpha,
        test_samples: test.len(),
        history,
        rows,
    })
}
