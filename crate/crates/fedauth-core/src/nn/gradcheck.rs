//! Finite-difference verification of the analytic gradients.

use crate::error::Result;
use crate::nn::loss::batch_softmax_xent;
use crate::nn::matrix::Matrix;
use crate::nn::network::{Gradients, Network};

fn batch_loss(net: &Network, x: &Matrix, labels: &[usize]) -> Result<f64> {
    let (logits, _) = net.forward(x)?;
    let (loss, _) = batch_softmax_xent(&logits, labels)?;
    Ok(loss)
}

/// Analytic gradients of the mean cross-entropy over the batch.
pub fn analytic_gradients(net: &Network, x: &Matrix, labels: &[usize]) -> Result<Gradients> {
    let (logits, cache) = net.forward(x)?;
    let (_, dlogits) = batch_softmax_xent(&logits, labels)?;
    let (grads, _) = net.backward(&cache, &dlogits)?;
    Ok(grads)
}

/// Maximum relative error between analytic and central-difference gradients
/// over every parameter of the network.
///
/// Relative error per parameter: |analytic − cd| / max(|analytic|, |cd|, 1e-8).
/// Meaningful only away from relu kinks; callers probing relu networks
/// should use inputs/parameters clear of z = 0.
pub fn grad_check(net: &Network, x: &Matrix, labels: &[usize], eps: f64) -> Result<f64> {
    assert!(eps > 0.0, "eps must be positive");
    let analytic = analytic_gradients(net, x, labels)?;
    let mut worst: f64 = 0.0;

    let mut probe = net.clone();
    for layer_idx in 0..net.layers.len() {
        for w_idx in 0..net.layers[layer_idx].weights.data.len() {
            let original = probe.layers[layer_idx].weights.data[w_idx];
            probe.layers[layer_idx].weights.data[w_idx] = original + eps;
            let plus = batch_loss(&probe, x, labels)?;
            probe.layers[layer_idx].weights.data[w_idx] = original - eps;
            let minus = batch_loss(&probe, x, labels)?;
            probe.layers[layer_idx].weights.data[w_idx] = original;
            let cd = (plus - minus) / (2.0 * eps);
            let a = analytic.layers[layer_idx].weights.data[w_idx];
            worst = worst.max((a - cd).abs() / a.abs().max(cd.abs()).max(1e-8));
        }
        for b_idx in 0..net.layers[layer_idx].bias.len() {
            let original = probe.layers[layer_idx].bias[b_idx];
            probe.layers[layer_idx].bias[b_idx] = original + eps;
            let plus = batch_loss(&probe, x, labels)?;
            probe.layers[layer_idx].bias[b_idx] = original - eps;
            let minus = batch_loss(&probe, x, labels)?;
            probe.layers[layer_idx].bias[b_idx] = original;
            let cd = (plus - minus) / (2.0 * eps);
            let a = analytic.layers[layer_idx].bias[b_idx];
            worst = worst.max((a - cd).abs() / a.abs().max(cd.abs()).max(1e-8));
        }
    }
    Ok(worst)
}
