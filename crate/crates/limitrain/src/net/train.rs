//! Mini-batch supervised training.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::seeded;

use super::{mse_gradient, mse_loss, AdamConfig, AdamState, Gradients, Mlp};

/// Anything that yields an (input, target) pair.
pub trait Sample {
    fn input(&self) -> &[f64];
    fn target(&self) -> &[f64];
}

impl Sample for (Vec<f64>, Vec<f64>) {
    fn input(&self) -> &[f64] {
        &self.0
    }
    fn target(&self) -> &[f64] {
        &self.1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    /// Training stops early once the epoch-mean loss reaches this.
    pub target_mse: f64,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            epochs: 200,
            target_mse: 1e-5,
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Epoch-mean MSE, one entry per epoch actually run.
    pub loss_history: Vec<f64>,
    pub final_loss: f64,
    pub epochs_run: usize,
    pub reached_target: bool,
}

/// Mean loss of `net` over `samples` without touching the parameters.
pub fn evaluate_mse<S: Sample>(net: &Mlp, samples: &[S]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidParam("evaluation over an empty set".into()));
    }
    let mut total = 0.0;
    for s in samples {
        let out = net.forward(s.input())?;
        total += mse_loss(&out, s.target())?.value;
    }
    Ok(total / samples.len() as f64)
}

/// Mini-batch Adam loop: seeded shuffle each epoch, mean gradient per
/// batch, stop at the epoch limit or when the epoch-mean MSE reaches
/// `target_mse`. Bitwise deterministic for a given seed.
pub fn train_epochs<S: Sample>(net: &mut Mlp, samples: &[S], cfg: &TrainConfig) -> Result<TrainReport> {
    if samples.is_empty() {
        return Err(Error::InvalidParam("training set is empty".into()));
    }
    if cfg.batch_size == 0 {
        return Err(Error::InvalidParam("batch size must be at least 1".into()));
    }
    let mut rng = seeded(cfg.seed);
    let mut adam = AdamState::new(net, cfg.adam);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut grads = Gradients::zeros_like(net);
    let mut history = Vec::new();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grads.zero();
            let mut batch_loss = 0.0;
            for &idx in batch {
                let s = &samples[idx];
                let cache = net.forward_cached(s.input())?;
                let loss = mse_loss(cache.output(), s.target())?;
                batch_loss += loss.value;
                net.backward(&cache, &mse_gradient(&loss), &mut grads)?;
            }
            let inv = 1.0 / batch.len() as f64;
            batch_loss *= inv;
            if !batch_loss.is_finite() {
                return Err(Error::Numerical(format!(
                    "training diverged at epoch {epoch}: batch loss {batch_loss}"
                )));
            }
            grads.scale(inv);
            adam.update(net, &grads)?;
            epoch_loss += batch_loss * batch.len() as f64;
        }
        epoch_loss /= samples.len() as f64;
        history.push(epoch_loss);
        if epoch_loss <= cfg.target_mse {
            break;
        }
    }

    let final_loss = history.last().copied().unwrap_or(f64::INFINITY);
    Ok(TrainReport {
        epochs_run: history.len(),
        reached_target: final_loss <= cfg.target_mse,
        final_loss,
        loss_history: history,
    })
}
