//! CSV outputs of the metrics stage.

use std::io::Write;

use super::{ClassSummary, EntropyBin, MetricRow, SampleStats};
use crate::error::{Error, Result};

fn finish<W: Write>(mut w: csv::Writer<W>) -> Result<()> {
    w.flush().map_err(|e| Error::io("<csv>", e))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `id,true_label,entropy,mean_correct,certainty`
pub fn write_samples_csv<W: Write>(stats: &[SampleStats], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["id", "true_label", "entropy", "mean_correct", "certainty"])?;
    for s in stats {
        w.write_record([
            s.id.to_string(),
            s.true_label.to_string(),
            s.entropy.to_string(),
            s.mean_correct.to_string(),
            s.certainty.to_string(),
        ])?;
    }
    finish(w)
}

/// `lo,hi,count,accuracy`
pub fn write_bins_csv<W: Write>(bins: &[EntropyBin], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["lo", "hi", "count", "accuracy"])?;
    for b in bins {
        w.write_record([
            b.lo.to_string(),
            b.hi.to_string(),
            b.count.to_string(),
            b.accuracy.to_string(),
        ])?;
    }
    finish(w)
}

/// `sigma,mode,alpha,alpha_sigma,pi,corr,psi_<lambda>...`; the lambda columns
/// come from the first row.
pub fn write_metrics_csv<W: Write>(rows: &[MetricRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let lambdas: Vec<f64> = rows
        .first()
        .map(|r| r.psi.iter().map(|&(l, _)| l).collect())
        .unwrap_or_default();
    let mut header: Vec<String> = ["sigma", "mode", "alpha", "alpha_sigma", "pi", "corr"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(lambdas.iter().map(|l| format!("psi_{l}")));
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.sigma.to_string(),
            r.mode.to_string(),
            r.alpha.to_string(),
            r.alpha_sigma.to_string(),
            r.pi.to_string(),
            r.corr.to_string(),
        ];
        rec.extend(r.psi.iter().map(|&(_, v)| v.to_string()));
        w.write_record(&rec)?;
    }
    finish(w)
}

/// `class,count,entropy_pct,accuracy,certainty`; empty classes leave blanks.
pub fn write_class_csv<W: Write>(rows: &[ClassSummary], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["class", "count", "entropy_pct", "accuracy", "certainty"])?;
    for r in rows {
        w.write_record([
            r.class.to_string(),
            r.count.to_string(),
            opt(r.entropy_pct),
            opt(r.accuracy),
            opt(r.certainty),
        ])?;
    }
    finish(w)
}
