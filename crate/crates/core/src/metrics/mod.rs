//! Entropy, accuracy and correlation summaries of a [`PredictionLog`].
//!
//! Entropy is the plug-in estimate over the `n` recorded predictions, in nats,
//! with no small-sample correction. Correctness/entropy correlation pools every
//! `(sample, draw)` pair by default: each sample contributes `n` pairs that
//! share its entropy.

mod report;

use serde::{Deserialize, Serialize};

pub use report::{
    write_bins_csv, write_class_csv, write_metrics_csv, write_samples_csv,
};

use crate::error::{Error, Result};
use crate::math::ClassIndex;
use crate::perturbation::{PerturbMode, PredictionLog};

/// Plug-in Shannon entropy (nats) of the empirical distribution of `preds`.
///
/// The result is clamped to `[0, ln C]` so rounding can never leave the range.
pub fn empirical_entropy(preds: &[ClassIndex], num_classes: usize) -> Result<f64> {
    if preds.is_empty() {
        return Err(Error::invalid("entropy of zero predictions"));
    }
    let mut counts = vec![0usize; num_classes];
    for &p in preds {
        if p >= num_classes {
            return Err(Error::invalid(format!(
                "prediction {p} outside {num_classes} classes"
            )));
        }
        counts[p] += 1;
    }
    let n = preds.len() as f64;
    let h: f64 = counts
        .iter()
        .filter(|&&k| k > 0)
        .map(|&k| {
            let p = k as f64 / n;
            -p * p.ln()
        })
        .sum();
    Ok(h.clamp(0.0, (num_classes as f64).ln()))
}

/// Accuracy drop `alpha - alpha_sigma`; negative when noise helps.
pub fn perturbation_index(alpha: f64, alpha_sigma: f64) -> f64 {
    alpha - alpha_sigma
}

/// `alpha_sigma - corr * lambda`.
pub fn psi(alpha_sigma: f64, corr: f64, lambda: f64) -> f64 {
    alpha_sigma - corr * lambda
}

/// Mean probability assigned to the true class.
pub fn certainty(true_probs: &[f64]) -> Result<f64> {
    if true_probs.is_empty() {
        return Err(Error::invalid("certainty of zero draws"));
    }
    Ok(true_probs.iter().sum::<f64>() / true_probs.len() as f64)
}

fn is_constant(v: &[f64]) -> bool {
    v.iter().all(|&x| x == v[0])
}

/// Pearson correlation; 0 when either side is constant.
pub fn pearson_corr(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::invalid(format!(
            "pearson_corr lengths differ: {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::invalid("pearson_corr needs at least two points"));
    }
    if is_constant(xs) || is_constant(ys) {
        return Ok(0.0);
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Per-sample summary of `n` perturbed predictions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleStats {
    pub id: usize,
    pub true_label: ClassIndex,
    /// Nats, in `[0, ln C]`.
    pub entropy: f64,
    /// Draws whose prediction was the true label.
    pub correct: usize,
    pub draws: usize,
    pub mean_correct: f64,
    pub certainty: f64,
}

pub fn sample_stats(log: &PredictionLog) -> Result<Vec<SampleStats>> {
    log.validate()?;
    log.samples
        .iter()
        .map(|s| {
            let correct = s.preds.iter().filter(|&&p| p == s.true_label).count();
            Ok(SampleStats {
                id: s.id,
                true_label: s.true_label,
                entropy: empirical_entropy(&s.preds, log.meta.num_classes)?,
                correct,
                draws: s.preds.len(),
                mean_correct: correct as f64 / s.preds.len() as f64,
                certainty: certainty(&s.true_probs)?,
            })
        })
        .collect()
}

/// How `(correctness, entropy)` pairs enter the correlation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorrPooling {
    /// Every `(sample, draw)` pair; the default.
    #[default]
    Pooled,
    /// One `(mean_correct, entropy)` pair per sample.
    PerSample,
}

/// Pooled perturbed accuracy and the correctness/entropy correlation.
pub fn alpha_and_corr(stats: &[SampleStats], pooling: CorrPooling) -> Result<(f64, f64)> {
    if stats.len() < 2 {
        return Err(Error::invalid("alpha_and_corr needs at least two samples"));
    }
    let correct: usize = stats.iter().map(|s| s.correct).sum();
    let draws: usize = stats.iter().map(|s| s.draws).sum();
    if draws == 0 {
        return Err(Error::invalid("alpha_and_corr over zero draws"));
    }
    let alpha_sigma = correct as f64 / draws as f64;
    let corr = match pooling {
        CorrPooling::PerSample => {
            let xs: Vec<f64> = stats.iter().map(|s| s.mean_correct).collect();
            let ys: Vec<f64> = stats.iter().map(|s| s.entropy).collect();
            pearson_corr(&xs, &ys)?
        }
        CorrPooling::Pooled => pooled_corr(stats, alpha_sigma, draws),
    };
    Ok((alpha_sigma, corr))
}

// Pearson over the expanded pairs, summed per sample: sample i holds `correct`
// ones and `draws - correct` zeros, all paired with the same entropy.
fn pooled_corr(stats: &[SampleStats], mean_beta: f64, draws: usize) -> f64 {
    let all_same_beta = stats.iter().all(|s| s.correct == 0) || stats.iter().all(|s| s.correct == s.draws);
    let first_h = stats[0].entropy;
    if all_same_beta || stats.iter().all(|s| s.entropy == first_h) {
        return 0.0;
    }
    let mean_h = stats.iter().map(|s| s.draws as f64 * s.entropy).sum::<f64>() / draws as f64;
    let (mut cov, mut var_b, mut var_h) = (0.0, 0.0, 0.0);
    for s in stats {
        let (k, n) = (s.correct as f64, s.draws as f64);
        let dh = s.entropy - mean_h;
        cov += (k - n * mean_beta) * dh;
        var_b += k * (1.0 - mean_beta).powi(2) + (n - k) * mean_beta * mean_beta;
        var_h += n * dh * dh;
    }
    (cov / (var_b * var_h).sqrt()).clamp(-1.0, 1.0)
}

/// One entropy window of the conditional-accuracy curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyBin {
    pub lo: f64,
    pub hi: f64,
    /// Samples whose entropy falls in `[lo, hi)` (last bin closed).
    pub count: usize,
    pub correct: usize,
    pub draws: usize,
    /// Pooled per-draw accuracy of the members; 0 for empty bins.
    pub accuracy: f64,
}

impl EntropyBin {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

pub const DEFAULT_NUM_BINS: usize = 20;
pub const DEFAULT_MIN_COUNT: usize = 5;

/// Every equal-width bin over `[0, ln C]`, empty ones included.
pub fn entropy_bins(stats: &[SampleStats], num_classes: usize, num_bins: usize) -> Result<Vec<EntropyBin>> {
    if num_bins == 0 {
        return Err(Error::invalid("num_bins must be at least 1"));
    }
    if num_classes < 2 {
        return Err(Error::invalid("entropy bins need at least two classes"));
    }
    let max_h = (num_classes as f64).ln();
    let width = max_h / num_bins as f64;
    let mut bins: Vec<EntropyBin> = (0..num_bins)
        .map(|b| EntropyBin {
            lo: b as f64 * width,
            hi: if b + 1 == num_bins { max_h } else { (b + 1) as f64 * width },
            count: 0,
            correct: 0,
            draws: 0,
            accuracy: 0.0,
        })
        .collect();
    for s in stats {
        let b = ((s.entropy / width).floor() as usize).min(num_bins - 1);
        bins[b].count += 1;
        bins[b].correct += s.correct;
        bins[b].draws += s.draws;
    }
    for b in &mut bins {
        if b.draws > 0 {
            b.accuracy = b.correct as f64 / b.draws as f64;
        }
    }
    Ok(bins)
}

/// Bins with at least `min_count` members.
pub fn binned_conditional_accuracy(
    stats: &[SampleStats],
    num_classes: usize,
    num_bins: usize,
    min_count: usize,
) -> Result<Vec<EntropyBin>> {
    if stats.is_empty() {
        return Err(Error::invalid("binning needs at least one sample"));
    }
    Ok(entropy_bins(stats, num_classes, num_bins)?
        .into_iter()
        .filter(|b| b.count >= min_count.max(1))
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionLine {
    pub slope: f64,
    pub intercept: f64,
}

impl RegressionLine {
    pub fn at(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

/// Least squares of bin accuracy on bin midpoint; `None` below two bins.
pub fn regression_line(bins: &[EntropyBin]) -> Option<RegressionLine> {
    if bins.len() < 2 {
        return None;
    }
    let n = bins.len() as f64;
    let mx = bins.iter().map(EntropyBin::midpoint).sum::<f64>() / n;
    let my = bins.iter().map(|b| b.accuracy).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for b in bins {
        let dx = b.midpoint() - mx;
        sxy += dx * (b.accuracy - my);
        sxx += dx * dx;
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some(RegressionLine {
        slope,
        intercept: my - slope * mx,
    })
}

/// Per-class averages for the bar chart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub class: ClassIndex,
    pub count: usize,
    /// Mean entropy as a percentage of `ln C`.
    pub entropy_pct: Option<f64>,
    pub accuracy: Option<f64>,
    pub certainty: Option<f64>,
}

pub fn per_class_eac(stats: &[SampleStats], num_classes: usize) -> Result<Vec<ClassSummary>> {
    if num_classes < 2 {
        return Err(Error::invalid("per-class summary needs at least two classes"));
    }
    let mut sums = vec![(0usize, 0.0, 0.0, 0.0); num_classes];
    for s in stats {
        let slot = sums.get_mut(s.true_label).ok_or_else(|| {
            Error::invalid(format!("label {} outside {num_classes} classes", s.true_label))
        })?;
        slot.0 += 1;
        slot.1 += s.entropy;
        slot.2 += s.mean_correct;
        slot.3 += s.certainty;
    }
    let max_h = (num_classes as f64).ln();
    Ok(sums
        .into_iter()
        .enumerate()
        .map(|(class, (count, h, acc, cert))| {
            let mean = |v: f64| (count > 0).then(|| v / count as f64);
            ClassSummary {
                class,
                count,
                entropy_pct: mean(h).map(|h| 100.0 * h / max_h),
                accuracy: mean(acc),
                certainty: mean(cert),
            }
        })
        .collect())
}

/// PI and PSI values of one `(sigma, mode)` grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub sigma: f64,
    pub mode: PerturbMode,
    pub alpha: f64,
    pub alpha_sigma: f64,
    pub pi: f64,
    pub corr: f64,
    /// `(lambda, psi)` in the order of the lambda grid.
    pub psi: Vec<(f64, f64)>,
}

impl MetricRow {
    pub fn new(sigma: f64, mode: PerturbMode, alpha: f64, alpha_sigma: f64, corr: f64, lambdas: &[f64]) -> Self {
        MetricRow {
            sigma,
            mode,
            alpha,
            alpha_sigma,
            pi: perturbation_index(alpha, alpha_sigma),
            corr,
            psi: lambdas.iter().map(|&l| (l, psi(alpha_sigma, corr, l))).collect(),
        }
    }

    /// `pi = alpha - alpha_sigma` and `psi = alpha_sigma - corr lambda`, to 1e-12.
    pub fn check(&self) -> Result<()> {
        if (self.pi + self.alpha_sigma - self.alpha).abs() > 1e-12 {
            return Err(Error::Invariant(format!(
                "pi {} + alpha_sigma {} != alpha {}",
                self.pi, self.alpha_sigma, self.alpha
            )));
        }
        for &(l, v) in &self.psi {
            if (v - (self.alpha_sigma - self.corr * l)).abs() > 1e-12 {
                return Err(Error::Invariant(format!("psi({l}) = {v} is not affine in lambda")));
            }
        }
        Ok(())
    }

    pub fn psi_at(&self, lambda: f64) -> Option<f64> {
        self.psi.iter().find(|(l, _)| *l == lambda).map(|&(_, v)| v)
    }
}

/// One row per requested `(sigma, mode)`, sigma-major, in grid order.
pub fn metric_grid(
    logs: &[PredictionLog],
    sigmas: &[f64],
    modes: &[PerturbMode],
    lambdas: &[f64],
    alpha: f64,
    pooling: CorrPooling,
) -> Result<Vec<MetricRow>> {
    let mut rows = Vec::with_capacity(sigmas.len() * modes.len());
    for &sigma in sigmas {
        for &mode in modes {
            let log = logs
                .iter()
                .find(|l| l.meta.sigma == sigma && l.meta.mode == mode)
                .ok_or_else(|| Error::invalid(format!("no log for sigma {sigma}, mode {mode}")))?;
            let stats = sample_stats(log)?;
            let (alpha_sigma, corr) = alpha_and_corr(&stats, pooling)?;
            let row = MetricRow::new(sigma, mode, alpha, alpha_sigma, corr, lambdas);
            row.check()?;
            rows.push(row);
        }
    }
    Ok(rows)
}
