//! Dense feed-forward network: forward/backward passes and model splitting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::matrix::Matrix;
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
}

/// One dense layer: y = act(W·x + b), with W stored out-by-in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn input_dim(&self) -> usize {
        self.weights.cols
    }

    pub fn output_dim(&self) -> usize {
        self.weights.rows
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init_uniform(
        out_dim: usize,
        in_dim: usize,
        activation: Activation,
        rng: &mut SeededRng,
    ) -> Self {
        let bound = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let mut weights = Matrix::zeros(out_dim, in_dim);
        for v in weights.data.iter_mut() {
            *v = rng.uniform_in(-bound, bound);
        }
        Self {
            weights,
            bias: vec![0.0; out_dim],
            activation,
        }
    }

    pub fn param_count(&self) -> usize {
        self.weights.data.len() + self.bias.len()
    }
}

/// Ordered dense layers; the last layer emits raw logits (identity
/// activation, softmax lives in the loss/score path).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub layers: Vec<DenseLayer>,
}

/// Per-layer activations retained by [`Network::forward`] for the backward
/// pass: the input to each layer and its pre-activation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub inputs: Vec<Matrix>,
    pub pre_activations: Vec<Matrix>,
}

/// Per-parameter gradients, shapes mirroring the network's layers.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub layers: Vec<LayerGradients>,
}

#[derive(Debug, Clone)]
pub struct LayerGradients {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGradients {
                    weights: Matrix::zeros(l.weights.rows, l.weights.cols),
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
        }
    }
}

impl Network {
    /// Build a network over `dims` = [input, hidden..., output]: relu on
    /// hidden layers, identity on the final layer.
    pub fn dense(dims: &[usize], rng: &mut SeededRng) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::Config(
                "network needs at least input and output dims".into(),
            ));
        }
        if dims.contains(&0) {
            return Err(Error::Config("zero-width layer".into()));
        }
        let last = dims.len() - 2;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let act = if i == last {
                    Activation::Identity
                } else {
                    Activation::Relu
                };
                DenseLayer::init_uniform(w[1], w[0], act, rng)
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty network").output_dim()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(DenseLayer::param_count).sum()
    }

    fn check_chain(&self) -> Result<()> {
        for pair in self.layers.windows(2) {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(Error::Shape(format!(
                    "layer chain broken: {} out vs {} in",
                    pair[0].output_dim(),
                    pair[1].input_dim()
                )));
            }
        }
        Ok(())
    }

    /// Batch forward pass. Rows of `x` are samples.
    pub fn forward(&self, x: &Matrix) -> Result<(Matrix, ForwardCache)> {
        if x.cols != self.input_dim() {
            return Err(Error::Shape(format!(
                "input has {} columns, network expects {}",
                x.cols,
                self.input_dim()
            )));
        }
        self.check_chain()?;
        let batch = x.rows;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        let mut current = x.clone();
        for layer in &self.layers {
            let mut z = current.matmul_transpose(&layer.weights)?;
            for r in 0..batch {
                for c in 0..layer.output_dim() {
                    z.data[r * z.cols + c] += layer.bias[c];
                }
            }
            inputs.push(current);
            let a = match layer.activation {
                Activation::Identity => z.clone(),
                Activation::Relu => {
                    let mut a = z.clone();
                    for v in a.data.iter_mut() {
                        if *v < 0.0 {
                            *v = 0.0;
                        }
                    }
                    a
                }
            };
            pre_activations.push(z);
            current = a;
        }
        Ok((
            current,
            ForwardCache {
                inputs,
                pre_activations,
            },
        ))
    }

    /// Convenience single-sample forward; returns the output row.
    pub fn forward_one(&self, x: &[f64]) -> Result<Vec<f64>> {
        let m = Matrix::from_vec(1, x.len(), x.to_vec())?;
        let (out, _) = self.forward(&m)?;
        Ok(out.data)
    }

    /// Backward pass from `dlogits` (one row per sample, matching the cache).
    ///
    /// Parameter gradients are accumulated over the batch and divided by the
    /// batch size; the returned input gradient stays per-sample.
    pub fn backward(&self, cache: &ForwardCache, dlogits: &Matrix) -> Result<(Gradients, Matrix)> {
        if cache.inputs.len() != self.layers.len() {
            return Err(Error::Shape(format!(
                "cache holds {} layers, network has {}",
                cache.inputs.len(),
                self.layers.len()
            )));
        }
        let batch = dlogits.rows;
        if batch == 0 {
            return Err(Error::Shape("empty batch".into()));
        }
        if dlogits.cols != self.output_dim() || cache.inputs[0].rows != batch {
            return Err(Error::Shape(format!(
                "dlogits {}x{} does not match cache batch {} / output dim {}",
                dlogits.rows,
                dlogits.cols,
                cache.inputs[0].rows,
                self.output_dim()
            )));
        }
        let mut grads = Gradients::zeros_like(self);
        let mut upstream = dlogits.clone();
        let inv_batch = 1.0 / batch as f64;
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            if upstream.cols != layer.output_dim() {
                return Err(Error::Shape(format!(
                    "upstream gradient width {} vs layer output {}",
                    upstream.cols,
                    layer.output_dim()
                )));
            }
            let z = &cache.pre_activations[idx];
            if layer.activation == Activation::Relu {
                for (g, &pre) in upstream.data.iter_mut().zip(&z.data) {
                    if pre <= 0.0 {
                        *g = 0.0;
                    }
                }
            }
            let x = &cache.inputs[idx];
            // dW[o][i] = (1/B) Σ_b upstream[b][o] · x[b][i]
            let mut dw = upstream.transpose().matmul(x)?;
            for v in dw.data.iter_mut() {
                *v *= inv_batch;
            }
            let mut db = vec![0.0; layer.output_dim()];
            for r in 0..batch {
                for c in 0..layer.output_dim() {
                    db[c] += upstream.get(r, c);
                }
            }
            for v in db.iter_mut() {
                *v *= inv_batch;
            }
            grads.layers[idx] = LayerGradients {
                weights: dw,
                bias: db,
            };
            upstream = upstream.matmul(&layer.weights)?;
        }
        Ok((grads, upstream))
    }
}

/// Split a network into a feature extractor (layers before `cut`) and a
/// classifier (layers from `cut` on). Composing the two reproduces the
/// original network exactly.
pub fn split_model(net: &Network, cut: usize) -> Result<(Network, Network)> {
    if cut == 0 || cut >= net.layers.len() {
        return Err(Error::Input(format!(
            "cut {} out of range for {} layers",
            cut,
            net.layers.len()
        )));
    }
    let extractor = Network {
        layers: net.layers[..cut].to_vec(),
    };
    let classifier = Network {
        layers: net.layers[cut..].to_vec(),
    };
    Ok((extractor, classifier))
}
