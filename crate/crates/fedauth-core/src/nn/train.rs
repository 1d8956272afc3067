//! Shared minibatch training loop (SGD with momentum, seeded shuffling).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::loss::batch_softmax_xent;
use crate::nn::matrix::Matrix;
use crate::nn::network::Network;
use crate::nn::optim::OptimizerState;
use crate::rng::SeededRng;

/// Hyperparameters for one cross-entropy training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        // SGD, lr 0.001, momentum 0.9, 100 epochs, batch 64.
        Self {
            epochs: 100,
            batch_size: 64,
            learning_rate: 0.001,
            momentum: 0.9,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config("momentum must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Per-epoch mean losses from a training run.
#[derive(Debug, Clone)]
pub struct TrainStats {
    pub epoch_losses: Vec<f64>,
}

/// Train `net` in place by minibatch SGD-momentum over `(x, labels)` rows,
/// reshuffling each epoch from `rng`. Returns per-epoch mean loss.
pub fn fit_classifier(
    net: &mut Network,
    x: &Matrix,
    labels: &[usize],
    cfg: &TrainConfig,
    rng: &mut SeededRng,
) -> Result<TrainStats> {
    cfg.validate()?;
    if x.rows != labels.len() {
        return Err(Error::Shape(format!(
            "{} samples vs {} labels",
            x.rows,
            labels.len()
        )));
    }
    if x.rows == 0 {
        return Err(Error::Input("empty training set".into()));
    }
    if labels.iter().any(|&y| y >= net.output_dim()) {
        return Err(Error::Config(format!(
            "label outside the network's {}-way head",
            net.output_dim()
        )));
    }
    let mut opt = OptimizerState::new(net, cfg.learning_rate, cfg.momentum)?;
    let mut order: Vec<usize> = (0..x.rows).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let mut bx = Matrix::zeros(chunk.len(), x.cols);
            let mut by = Vec::with_capacity(chunk.len());
            for (r, &idx) in chunk.iter().enumerate() {
                bx.data[r * x.cols..(r + 1) * x.cols].copy_from_slice(x.row(idx));
                by.push(labels[idx]);
            }
            let (logits, cache) = net.forward(&bx)?;
            let (loss, dlogits) = batch_softmax_xent(&logits, &by)?;
            let (grads, _) = net.backward(&cache, &dlogits)?;
            opt.step(net, &grads)?;
            epoch_loss += loss;
            batches += 1;
        }
        epoch_losses.push(epoch_loss / batches as f64);
    }
    Ok(TrainStats { epoch_losses })
}

/// Fraction of rows whose argmax logit equals the label.
pub fn classification_accuracy(net: &Network, x: &Matrix, labels: &[usize]) -> Result<f64> {
    let (logits, _) = net.forward(x)?;
    let mut correct = 0usize;
    for (r, &label) in labels.iter().enumerate() {
        if argmax(logits.row(r)) == label {
            correct += 1;
        }
    }
    Ok(correct as f64 / labels.len() as f64)
}

/// Index of the largest value; ties break to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
