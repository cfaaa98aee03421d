//! Gaussian perturbation of weights or inputs, and the Monte-Carlo pass that
//! records repeated argmax predictions.
//!
//! Random streams (all under the master seed):
//! - weight mode, shared draws: `[WEIGHT_NOISE, sigma, draw]`
//! - weight mode, per-sample draws: `[WEIGHT_NOISE_PER_SAMPLE, sigma, sample, draw]`
//! - input mode: `[INPUT_NOISE, sigma, sample]`, consumed for draws `0..n` in order
//!
//! `sigma` enters through its bit pattern, and samples through their index in
//! the evaluated dataset, so results are independent of how work is split.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::math::{clamp_unit_in_place, ClassIndex};
use crate::models::Model;
use crate::rng::{fill_standard_normal, purpose, sigma_key, RngStream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerturbMode {
    /// Noise on every trainable parameter.
    Weight,
    /// Noise on the input pixels, clamped back into `[0, 1]`.
    Input,
}

impl PerturbMode {
    pub const ALL: [PerturbMode; 2] = [PerturbMode::Weight, PerturbMode::Input];
}

impl fmt::Display for PerturbMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PerturbMode::Weight => "weight",
            PerturbMode::Input => "input",
        })
    }
}

impl FromStr for PerturbMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "weight" => Ok(PerturbMode::Weight),
            "input" => Ok(PerturbMode::Input),
            other => Err(Error::config("modes", format!("unknown mode `{other}`"))),
        }
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(Error::invalid(format!("sigma must be finite and >= 0, got {sigma}")));
    }
    Ok(())
}

/// `model` with `sigma * N(0, 1)` added to every parameter. No clamping.
pub fn perturb_params(model: &Model, sigma: f64, rng: &RngStream) -> Result<Model> {
    check_sigma(sigma)?;
    let mut out = model.clone();
    if sigma == 0.0 {
        return Ok(out);
    }
    add_noise(out.params_mut(), sigma, &mut rng.rng());
    Ok(out)
}

fn add_noise<R: rand::Rng + ?Sized>(values: &mut [f64], sigma: f64, rng: &mut R) {
    let mut noise = vec![0.0; values.len()];
    fill_standard_normal(rng, &mut noise);
    for (v, n) in values.iter_mut().zip(&noise) {
        *v += sigma * n;
    }
}

/// `clamp(x + sigma * N(0, 1), 0, 1)` entrywise.
pub fn perturb_input(x: &[f64], sigma: f64, rng: &RngStream) -> Result<Vec<f64>> {
    check_sigma(sigma)?;
    let mut out = x.to_vec();
    if sigma > 0.0 {
        add_noise(&mut out, sigma, &mut rng.rng());
    }
    clamp_unit_in_place(&mut out);
    Ok(out)
}

/// Provenance of a [`PredictionLog`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogMeta {
    pub sigma: f64,
    pub mode: PerturbMode,
    pub n: usize,
    pub model: String,
    pub seed: u64,
    pub num_classes: usize,
}

/// `n` perturbed predictions for one sample.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleRecord {
    pub id: usize,
    pub true_label: ClassIndex,
    pub preds: Vec<ClassIndex>,
    /// Probability each perturbed forward pass gave the true class.
    pub true_probs: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredictionLog {
    pub meta: LogMeta,
    pub samples: Vec<SampleRecord>,
}

impl PredictionLog {
    /// Checks every record has `n` predictions below `C` and `n` probabilities in `[0, 1]`.
    pub fn validate(&self) -> Result<()> {
        let LogMeta { n, num_classes, .. } = self.meta;
        if n == 0 {
            return Err(Error::invalid("log has n = 0"));
        }
        for s in &self.samples {
            if s.preds.len() != n || s.true_probs.len() != n {
                return Err(Error::invalid(format!(
                    "sample {} has {} predictions and {} probabilities, expected {n}",
                    s.id,
                    s.preds.len(),
                    s.true_probs.len()
                )));
            }
            if s.true_label >= num_classes || s.preds.iter().any(|&p| p >= num_classes) {
                return Err(Error::invalid(format!(
                    "sample {} has a class outside [0, {num_classes})",
                    s.id
                )));
            }
            if s.true_probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::invalid(format!(
                    "sample {} has a probability outside [0, 1]",
                    s.id
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PassConfig {
    pub sigma: f64,
    pub mode: PerturbMode,
    pub n: usize,
    /// Weight mode only: fresh parameter noise for every sample.
    pub independent_draws: bool,
    pub exec: Exec,
    /// Recorded in the log metadata.
    pub model_id: String,
}

impl PassConfig {
    pub fn new(sigma: f64, mode: PerturbMode, n: usize) -> Self {
        PassConfig {
            sigma,
            mode,
            n,
            independent_draws: false,
            exec: Exec::default(),
            model_id: String::new(),
        }
    }
}

/// Noise tensors drawn during one pass.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PassCounters {
    pub model_perturbations: usize,
    pub input_perturbations: usize,
}

const EVAL_CHUNK: usize = 64;

/// Runs the Monte-Carlo pass and returns the per-sample prediction log.
pub fn run_perturbed_pass(
    model: &Model,
    data: &LabeledDataset,
    cfg: &PassConfig,
    rng: &RngStream,
) -> Result<PredictionLog> {
    run_pass_counted(model, data, cfg, rng).map(|(log, _)| log)
}

/// [`run_perturbed_pass`] plus the number of noise tensors it drew.
pub fn run_pass_counted(
    model: &Model,
    data: &LabeledDataset,
    cfg: &PassConfig,
    rng: &RngStream,
) -> Result<(PredictionLog, PassCounters)> {
    check_sigma(cfg.sigma)?;
    if cfg.n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    if data.is_empty() {
        return Err(Error::invalid("cannot run a pass over an empty dataset"));
    }
    if data.input_dim() != model.input_dim() || data.num_classes() != model.num_classes() {
        return Err(Error::invalid(format!(
            "dataset ({} inputs, {} classes) does not fit model ({} inputs, {} classes)",
            data.input_dim(),
            data.num_classes(),
            model.input_dim(),
            model.num_classes()
        )));
    }
    let n = cfg.n;
    let skey = sigma_key(cfg.sigma);
    let ids: Vec<usize> = (0..data.len()).collect();

    let (samples, counters) = match (cfg.mode, cfg.independent_draws) {
        (PerturbMode::Weight, false) => {
            let mut preds = vec![Vec::with_capacity(n); data.len()];
            let mut probs = vec![Vec::with_capacity(n); data.len()];
            for draw in 0..n {
                let stream = rng.derive(&[purpose::WEIGHT_NOISE, skey, draw as u64]);
                let perturbed = perturb_params(model, cfg.sigma, &stream)?;
                let chunks = cfg.exec.map_chunks(&ids, EVAL_CHUNK, |_, chunk| {
                    chunk
                        .iter()
                        .map(|&i| {
                            let (pred, p) = perturbed.predict_unchecked(data.image(i));
                            (pred, p[data.label(i)])
                        })
                        .collect::<Vec<_>>()
                });
                for (i, (pred, p)) in chunks.into_iter().flatten().enumerate() {
                    preds[i].push(pred);
                    probs[i].push(p);
                }
            }
            let samples = preds
                .into_iter()
                .zip(probs)
                .enumerate()
                .map(|(i, (preds, true_probs))| SampleRecord {
                    id: i,
                    true_label: data.label(i),
                    preds,
                    true_probs,
                })
                .collect();
            let counters = PassCounters {
                model_perturbations: n,
                input_perturbations: 0,
            };
            (samples, counters)
        }
        (PerturbMode::Weight, true) => {
            let samples = per_sample(cfg.exec, &ids, |i| {
                let mut rec = SampleRecord::empty(i, data.label(i), n);
                for draw in 0..n {
                    let stream = rng.derive(&[
                        purpose::WEIGHT_NOISE_PER_SAMPLE,
                        skey,
                        i as u64,
                        draw as u64,
                    ]);
                    let perturbed = perturb_params(model, cfg.sigma, &stream)?;
                    rec.push(perturbed.predict_unchecked(data.image(i)));
                }
                Ok(rec)
            })?;
            let counters = PassCounters {
                model_perturbations: n * data.len(),
                input_perturbations: 0,
            };
            (samples, counters)
        }
        (PerturbMode::Input, _) => {
            let samples = per_sample(cfg.exec, &ids, |i| {
                let mut rec = SampleRecord::empty(i, data.label(i), n);
                let mut gen = rng.derive(&[purpose::INPUT_NOISE, skey, i as u64]).rng();
                let x = data.image(i);
                let mut noisy = vec![0.0; x.len()];
                for _ in 0..n {
                    noisy.copy_from_slice(x);
                    if cfg.sigma > 0.0 {
                        add_noise(&mut noisy, cfg.sigma, &mut gen);
                    }
                    clamp_unit_in_place(&mut noisy);
                    rec.push(model.predict_unchecked(&noisy));
                }
                Ok(rec)
            })?;
            let counters = PassCounters {
                model_perturbations: 0,
                input_perturbations: n * data.len(),
            };
            (samples, counters)
        }
    };

    let log = PredictionLog {
        meta: LogMeta {
            sigma: cfg.sigma,
            mode: cfg.mode,
            n,
            model: cfg.model_id.clone(),
            seed: rng.master_seed(),
            num_classes: data.num_classes(),
        },
        samples,
    };
    log.validate().map_err(|e| Error::Invariant(e.to_string()))?;
    Ok((log, counters))
}

impl SampleRecord {
    fn empty(id: usize, true_label: ClassIndex, n: usize) -> Self {
        SampleRecord {
            id,
            true_label,
            preds: Vec::with_capacity(n),
            true_probs: Vec::with_capacity(n),
        }
    }

    fn push(&mut self, (pred, probs): (ClassIndex, Vec<f64>)) {
        self.preds.push(pred);
        self.true_probs.push(probs[self.true_label]);
    }
}

fn per_sample<F>(exec: Exec, ids: &[usize], f: F) -> Result<Vec<SampleRecord>>
where
    F: Fn(usize) -> Result<SampleRecord> + Sync + Send,
{
    exec.map_chunks(ids, EVAL_CHUNK, |_, chunk| {
        chunk.iter().map(|&i| f(i)).collect::<Result<Vec<_>>>()
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()
    .map(|chunks| chunks.into_iter().flatten().collect())
}

// CSV form:
//   # sigma=<f64>,mode=<weight|input>,n=<usize>,model=<id>,seed=<u64>,classes=<usize>
//   id,true_label,pred_0,...,pred_{n-1},prob_0,...,prob_{n-1}
//   one row per sample

/// Writes the log as CSV: a `#` metadata line, a header, one row per sample.
pub fn write_log_csv<W: Write>(log: &PredictionLog, out: W) -> Result<()> {
    let m = &log.meta;
    let mut out = out;
    writeln!(
        out,
        "# sigma={},mode={},n={},model={},seed={},classes={}",
        m.sigma, m.mode, m.n, m.model, m.seed, m.num_classes
    )
    .map_err(|e| Error::io("<prediction log>", e))?;
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["id".to_string(), "true_label".to_string()];
    header.extend((0..m.n).map(|i| format!("pred_{i}")));
    header.extend((0..m.n).map(|i| format!("prob_{i}")));
    w.write_record(&header)?;
    for s in &log.samples {
        let mut row = vec![s.id.to_string(), s.true_label.to_string()];
        row.extend(s.preds.iter().map(|p| p.to_string()));
        row.extend(s.true_probs.iter().map(|p| p.to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<prediction log>", e))?;
    Ok(())
}

fn parse_meta(line: &str) -> Result<LogMeta> {
    let body = line
        .strip_prefix('#')
        .ok_or_else(|| Error::invalid("prediction log must start with a `#` metadata line"))?;
    let mut sigma = None;
    let mut mode = None;
    let mut n = None;
    let mut model = String::new();
    let mut seed = None;
    let mut classes = None;
    let bad = |k: &str| Error::invalid(format!("bad `{k}` in log metadata"));
    for kv in body.trim().split(',') {
        let (k, v) = kv.split_once('=').ok_or_else(|| bad(kv))?;
        match k {
            "sigma" => sigma = Some(v.parse::<f64>().map_err(|_| bad(k))?),
            "mode" => mode = Some(v.parse::<PerturbMode>().map_err(|_| bad(k))?),
            "n" => n = Some(v.parse::<usize>().map_err(|_| bad(k))?),
            "model" => model = v.to_string(),
            "seed" => seed = Some(v.parse::<u64>().map_err(|_| bad(k))?),
            "classes" => classes = Some(v.parse::<usize>().map_err(|_| bad(k))?),
            _ => {}
        }
    }
    Ok(LogMeta {
        sigma: sigma.ok_or_else(|| bad("sigma"))?,
        mode: mode.ok_or_else(|| bad("mode"))?,
        n: n.ok_or_else(|| bad("n"))?,
        model,
        seed: seed.unwrap_or(0),
        num_classes: classes.ok_or_else(|| bad("classes"))?,
    })
}

pub fn read_log_csv<R: BufRead>(mut input: R) -> Result<PredictionLog> {
    let mut first = String::new();
    input
        .read_line(&mut first)
        .map_err(|e| Error::io("<prediction log>", e))?;
    let meta = parse_meta(first.trim_end())?;
    let n = meta.n;
    let mut r = csv::Reader::from_reader(input);
    if r.headers()?.len() != 2 + 2 * n {
        return Err(Error::invalid(format!(
            "log header has {} columns, expected {}",
            r.headers()?.len(),
            2 + 2 * n
        )));
    }
    let mut samples = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let int = |i: usize| {
            field(i)
                .parse::<usize>()
                .map_err(|_| Error::invalid(format!("bad integer `{}` in log", field(i))))
        };
        let preds = (0..n).map(|j| int(2 + j)).collect::<Result<Vec<_>>>()?;
        let true_probs = (0..n)
            .map(|j| {
                field(2 + n + j)
                    .parse::<f64>()
                    .map_err(|_| Error::invalid(format!("bad probability `{}`", field(2 + n + j))))
            })
            .collect::<Result<Vec<_>>>()?;
        samples.push(SampleRecord {
            id: int(0)?,
            true_label: int(1)?,
            preds,
            true_probs,
        });
    }
    let log = PredictionLog { meta, samples };
    log.validate()?;
    Ok(log)
}

pub fn save_log(log: &PredictionLog, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_log_csv(log, std::io::BufWriter::new(file))
}

pub fn load_log(path: &Path) -> Result<PredictionLog> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_log_csv(std::io::BufReader::new(file))
}
