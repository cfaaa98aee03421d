use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use entropy_uq::config::ExperimentConfig;
use entropy_uq::experiment::{self, AlphaRecord, MetricsOptions};
use entropy_uq::models::{load_checkpoint, ModelKind};
use entropy_uq::perturbation::PerturbMode;
use entropy_uq::{Error, Exec, Result};

/// Perturbation-based uncertainty metrics for MNIST classifiers.
#[derive(Parser)]
#[command(name = "entropy-uq", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model, save its checkpoint and test accuracy.
    Train(Common),
    /// Write one prediction log per (sigma, mode) for a trained checkpoint.
    Perturb {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Turn prediction logs into CSVs, plots and metrics.csv.
    Metrics {
        #[command(flatten)]
        common: Common,
        /// Directory of prediction-log CSVs.
        #[arg(long)]
        logs: PathBuf,
        /// Unperturbed accuracy; defaults to alpha.json beside or above the logs.
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Train, perturb and summarize in one go.
    Run(Common),
}

/// Flags mirror config keys and override values from `--config`.
#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    model: Option<ModelKind>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    sigmas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    lambdas: Option<Vec<f64>>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    modes: Option<Vec<PerturbMode>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
    /// Use the whole test set even for the CNN.
    #[arg(long)]
    full: bool,
    /// Overwrite existing outputs.
    #[arg(long)]
    force: bool,
    /// Fresh weight noise for every sample.
    #[arg(long)]
    independent_draws: bool,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = &self.$field {
                    c.$field = v.clone();
                }
            )*};
        }
        set!(data_dir, model, epochs, batch_size, sigmas, lambdas, iters, modes, seed, out);
        if self.jobs.is_some() {
            c.jobs = self.jobs;
        }
        c.full |= self.full;
        c.independent_draws |= self.independent_draws;
        c.validate()?;
        Ok(c)
    }
}

fn write_resolved(cfg: &ExperimentConfig) -> Result<()> {
    let path = cfg.out.join(experiment::RESOLVED_CONFIG);
    std::fs::write(&path, cfg.resolved().to_json()).map_err(|e| Error::Io { path, source: e })
}

fn find_alpha(logs: &Path) -> Result<f64> {
    let candidates = [Some(logs), logs.parent()];
    for dir in candidates.into_iter().flatten() {
        let path = dir.join(experiment::ALPHA_JSON);
        if path.is_file() {
            return Ok(AlphaRecord::load(&path)?.alpha);
        }
    }
    Err(Error::Config {
        field: "alpha".into(),
        message: format!("no {} near {}; pass --alpha", experiment::ALPHA_JSON, logs.display()),
    })
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Train(common) => {
            let cfg = common.config()?.resolved();
            experiment::prepare_stage_output(
                &cfg.out,
                &[experiment::CHECKPOINT, experiment::TRAINING_CSV, experiment::ALPHA_JSON],
                common.force,
            )?;
            write_resolved(&cfg)?;
            let (train, test) = experiment::load_data(&cfg)?;
            let (_, alpha, _) = experiment::train_stage(&cfg, &train, &test, &cfg.out)?;
            println!("alpha = {:.4} on {} test samples", alpha.alpha, alpha.total);
        }
        Command::Perturb { common, checkpoint } => {
            let mut cfg = common.config()?;
            let model = load_checkpoint(&checkpoint, None)?;
            cfg.model = model.architecture().kind();
            let cfg = cfg.resolved();
            experiment::prepare_stage_output(
                &cfg.out,
                &[experiment::LOGS_DIR],
                common.force,
            )?;
            let (_, test) = experiment::load_data(&cfg)?;
            let alpha = experiment::alpha_record(&model, &test, Exec::default())?;
            // `train` may already have written it for this model
            let alpha_path = cfg.out.join(experiment::ALPHA_JSON);
            if common.force || !alpha_path.exists() {
                alpha.save(&alpha_path)?;
            }
            let logs = experiment::perturb_stage(&cfg, &model, &test, Some(&cfg.out))?;
            println!(
                "alpha = {:.4}; wrote {} logs to {}",
                alpha.alpha,
                logs.len(),
                cfg.out.join(experiment::LOGS_DIR).display()
            );
        }
        Command::Metrics { common, logs, alpha } => {
            let cfg = common.config()?;
            let alpha = match alpha {
                Some(a) => a,
                None => find_alpha(&logs)?,
            };
            experiment::prepare_stage_output(&cfg.out, &[experiment::METRICS_CSV], common.force)?;
            let logs = experiment::load_logs_dir(&logs)?;
            let rows = experiment::metrics_stage(&logs, alpha, &MetricsOptions::from(&cfg), &cfg.out)?;
            let summary = experiment::Summary {
                out: cfg.out.clone(),
                alpha,
                test_samples: logs[0].len(),
                history: Vec::new(),
                rows,
            };
            print!("{}", summary.table());
        }
        Command::Run(common) => {
            let cfg = common.config()?;
            let summary = experiment::run_experiment(&cfg, common.force)?;
            print!("{}", summary.table());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
