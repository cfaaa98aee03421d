use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{AdamConfig, AdamState, Model};
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::models::adam_step;
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainOptions {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub exec: Exec,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            epochs: 10,
            batch_size: 64,
            adam: AdamConfig::default(),
            exec: Exec::default(),
        }
    }
}

/// Running statistics of one epoch, measured on each batch before its update.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

/// Mini-batch Adam on mean cross-entropy. Epoch `e` shuffles with
/// `rng.child(e)`; the last batch of an epoch may be short.
pub fn train(
    model: &Model,
    data: &LabeledDataset,
    opts: &TrainOptions,
    rng: &RngStream,
) -> Result<(Model, Vec<EpochStats>)> {
    if data.is_empty() {
        return Err(Error::invalid("cannot train on an empty dataset"));
    }
    if opts.epochs == 0 {
        return Err(Error::invalid("epochs must be at least 1"));
    }
    if opts.batch_size == 0 {
        return Err(Error::invalid("batch_size must be at least 1"));
    }
    let mut model = model.clone();
    let mut state = AdamState::new(model.num_params(), opts.adam);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(opts.epochs);
    for epoch in 0..opts.epochs {
        order.sort_unstable();
        order.shuffle(&mut rng.child(epoch as u64).rng());
        let mut loss_sum = 0.0;
        let mut correct = 0;
        for batch in order.chunks(opts.batch_size) {
            let step = model.gradients(data, batch, opts.exec)?;
            loss_sum += step.loss * batch.len() as f64;
            correct += step.correct;
            adam_step(model.params_mut(), &step.grad, &mut state)?;
        }
        let stats = EpochStats {
            epoch: epoch + 1,
            loss: loss_sum / data.len() as f64,
            accuracy: correct as f64 / data.len() as f64,
        };
        log::info!(
            "epoch {}/{}: loss {:.4}, running accuracy {:.4}",
            stats.epoch,
            opts.epochs,
            stats.loss,
            stats.accuracy
        );
        history.push(stats);
    }
    Ok((model, history))
}
