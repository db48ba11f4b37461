//! Seeded mini-batch training loop.

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use super::network::{argmax, Network};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 60,
            batch_size: 32,
            learning_rate: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::BadConfig("batch size must be at least 1".into()));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::BadConfig(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.beta1)
            || !(0.0..1.0).contains(&self.beta2)
            || self.epsilon.is_nan()
            || self.epsilon <= 0.0
        {
            return Err(Error::BadConfig("Adam constants out of range".into()));
        }
        Ok(())
    }
}

/// Per-epoch mean training loss and accuracy, measured on the forward pass
/// preceding each update.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub loss: Vec<f64>,
    pub accuracy: Vec<f64>,
}

/// Trains a copy of `net` on already-standardized rows. Each epoch reshuffles
/// with a generator seeded once from `cfg.seed`; the final partial batch is
/// kept.
pub fn train(
    net: &Network,
    x: ArrayView2<f64>,
    labels: &[usize],
    cfg: &TrainConfig,
) -> Result<(Network, TrainHistory)> {
    cfg.validate()?;
    if x.nrows() == 0 {
        return Err(Error::EmptyTrainSet);
    }
    if labels.len() != x.nrows() {
        return Err(Error::DimMismatch {
            expected: x.nrows(),
            actual: labels.len(),
        });
    }

    let mut net = net.clone();
    let mut state = AdamState::new(&net);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..x.nrows()).collect();
    let mut history = TrainHistory::default();
    let n = x.nrows() as f64;

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for batch in order.chunks(cfg.batch_size) {
            let xb: Array2<f64> = x.select(Axis(0), batch);
            let yb: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();
            let pass = net.backward(xb.view(), &yb)?;
            loss_sum += pass.loss * batch.len() as f64;
            correct += pass
                .probs
                .rows()
                .into_iter()
                .zip(&yb)
                .filter(|(p, y)| argmax(*p) == **y)
                .count();
            adam_step(&mut net, &pass.grads, &mut state, cfg)?;
        }
        history.loss.push(loss_sum / n);
        history.accuracy.push(correct as f64 / n);
    }
    Ok((net, history))
}
