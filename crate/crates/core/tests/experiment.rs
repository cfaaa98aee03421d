mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use entropy_uq::config::ExperimentConfig;
use entropy_uq::experiment::{self, grid_name, load_logs_dir, metrics_stage, run_experiment, MetricsOptions};
use entropy_uq::perturbation::PerturbMode;

fn config(data: &Path, out: &Path) -> ExperimentConfig {
    ExperimentConfig {
        data_dir: data.to_path_buf(),
        out: out.to_path_buf(),
        epochs: 5,
        batch_size: 16,
        adam: entropy_uq::models::AdamConfig { lr: 5e-2, ..Default::default() },
        sigmas: vec![0.0, 0.5],
        iters: 5,
        seed: 7,
        ..Default::default()
    }
}

fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                files.insert(rel, fs::read(&p).unwrap());
            }
        }
    }
    files
}

#[test]
fn run_writes_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let data = common::blobs_dir(&tmp.path().join("data").tap_mkdir());
    let out = tmp.path().join("out");
    let summary = run_experiment(&config(&data, &out), false).unwrap();
    assert_eq!(summary.rows.len(), 4);
    assert_eq!(summary.test_samples, 100);
    assert_eq!(summary.history.len(), 5);
    assert!(summary.alpha > 0.9, "alpha {}", summary.alpha);

    for f in ["config.resolved.json", "model.ckpt", "training.csv", "alpha.json", "metrics.csv"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    for sigma in [0.0, 0.5] {
        for mode in PerturbMode::ALL {
            let name = grid_name(sigma, mode);
            assert!(out.join("logs").join(format!("{name}.csv")).is_file());
            for f in ["samples.csv", "bins.csv", "eac_class.csv", "eac_scatter.svg", "eac_bars.svg"] {
                assert!(out.join(&name).join(f).is_file(), "{name}/{f}");
            }
        }
    }
    let metrics = fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 5);

    // sigma = 0 reproduces the clean model exactly
    for r in summary.rows.iter().filter(|r| r.sigma == 0.0) {
        assert_eq!(r.pi, 0.0);
        assert_eq!(r.corr, 0.0);
        assert_eq!(r.alpha_sigma, r.alpha);
        assert!(r.psi.iter().all(|&(_, v)| v == r.alpha_sigma));
    }
    let resolved = ExperimentConfig::from_file(&out.join("config.resolved.json")).unwrap();
    assert_eq!(resolved.sigmas, [0.0, 0.5]);
    print!("{}", summary.table());
}

#[test]
fn reruns_are_byte_identical_and_collisions_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let data = common::blobs_dir(&tmp.path().join("data").tap_mkdir());
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    run_experiment(&config(&data, &a), false).unwrap();
    let mut cfg_b = config(&data, &b);
    cfg_b.jobs = Some(1);
    run_experiment(&cfg_b, false).unwrap();
    let (ta, tb) = (tree(&a), tree(&b));
    assert_eq!(ta.keys().collect::<Vec<_>>(), tb.keys().collect::<Vec<_>>());
    for (k, v) in &ta {
        if k != "config.resolved.json" {
            assert!(v == &tb[k], "{k} differs");
        }
    }

    let err = run_experiment(&config(&data, &a), false).unwrap_err();
    assert_eq!(err.exit_code(), 3);
    run_experiment(&config(&data, &a), true).unwrap();
}

#[test]
fn metrics_stage_reads_logs_back() {
    let tmp = tempfile::tempdir().unwrap();
    let data = common::blobs_dir(&tmp.path().join("data").tap_mkdir());
    let out = tmp.path().join("out");
    let cfg = config(&data, &out);
    run_experiment(&cfg, false).unwrap();
    let logs = load_logs_dir(&out.join("logs")).unwrap();
    assert_eq!(logs.len(), 4);
    let alpha = experiment::AlphaRecord::load(&out.join("alpha.json")).unwrap();
    let again = tmp.path().join("again");
    fs::create_dir(&again).unwrap();
    metrics_stage(&logs, alpha.alpha, &MetricsOptions::from(&cfg), &again).unwrap();
    assert_eq!(
        fs::read(out.join("metrics.csv")).unwrap(),
        fs::read(again.join("metrics.csv")).unwrap()
    );
}

#[test]
fn missing_data_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(&tmp.path().join("nothing"), &tmp.path().join("out"));
    assert_eq!(run_experiment(&cfg, false).unwrap_err().exit_code(), 2);
}

trait TapMkdir {
    fn tap_mkdir(self) -> Self;
}

impl TapMkdir for std::path::PathBuf {
    fn tap_mkdir(self) -> Self {
        fs::create_dir_all(&self).unwrap();
        self
    }
}
