//! Softmax cross-entropy and Shannon entropy (natural log).

use crate::error::{Error, Result};
use crate::nn::matrix::Matrix;

/// Probability clamp applied before any log.
const PROB_FLOOR: f64 = 1e-12;

/// Tolerance on Σp = 1 for probability-vector validation.
const PROB_SUM_TOL: f64 = 1e-9;

/// Numerically stable softmax (max-shifted).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let mut out: Vec<f64> = logits.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for v in out.iter_mut() {
        *v /= sum;
    }
    out
}

/// Cross-entropy loss for one sample and its gradient w.r.t. the logits.
///
/// loss = −ln p\[label\] with p = softmax(logits); dlogits = p − onehot(label).
pub fn softmax_xent(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
    if label >= logits.len() {
        return Err(Error::Input(format!(
            "label {label} out of range for {} classes",
            logits.len()
        )));
    }
    let p = softmax(logits);
    let loss = -(p[label].max(PROB_FLOOR)).ln();
    let mut dlogits = p;
    dlogits[label] -= 1.0;
    Ok((loss, dlogits))
}

/// Mean cross-entropy over a batch of logit rows, plus the per-sample
/// dlogits rows (unscaled; the backward pass applies the 1/batch factor).
pub fn batch_softmax_xent(logits: &Matrix, labels: &[usize]) -> Result<(f64, Matrix)> {
    if logits.rows != labels.len() {
        return Err(Error::Shape(format!(
            "{} logit rows vs {} labels",
            logits.rows,
            labels.len()
        )));
    }
    let mut total = 0.0;
    let mut dlogits = Matrix::zeros(logits.rows, logits.cols);
    for (r, &label) in labels.iter().enumerate() {
        let (loss, dl) = softmax_xent(logits.row(r), label)?;
        total += loss;
        dlogits.data[r * logits.cols..(r + 1) * logits.cols].copy_from_slice(&dl);
    }
    Ok((total / logits.rows as f64, dlogits))
}

/// Shannon entropy H = −Σ p ln p with 0·ln 0 ≡ 0.
///
/// Validates that `p` is a probability vector (nonnegative, sums to one).
pub fn entropy(p: &[f64]) -> Result<f64> {
    let mut sum = 0.0;
    for &v in p {
        if v < 0.0 {
            return Err(Error::Input(format!("negative probability {v}")));
        }
        sum += v;
    }
    if (sum - 1.0).abs() > PROB_SUM_TOL {
        return Err(Error::Input(format!("probabilities sum to {sum}, not 1")));
    }
    let mut h = 0.0;
    for &v in p {
        if v > 0.0 {
            h -= v * v.ln();
        }
    }
    Ok(h)
}
