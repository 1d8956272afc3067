//! SGD with classical momentum: v ← βv + g, θ ← θ − lr·v.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::network::{Gradients, Network};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizerState {
    pub learning_rate: f64,
    pub momentum: f64,
    velocity_weights: Vec<Vec<f64>>,
    velocity_bias: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(net: &Network, learning_rate: f64, momentum: f64) -> Result<Self> {
        if learning_rate <= 0.0 {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {learning_rate}"
            )));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::Config(format!(
                "momentum must lie in [0, 1), got {momentum}"
            )));
        }
        Ok(Self {
            learning_rate,
            momentum,
            velocity_weights: net
                .layers
                .iter()
                .map(|l| vec![0.0; l.weights.data.len()])
                .collect(),
            velocity_bias: net.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        })
    }

    /// One optimizer step over every parameter tensor.
    pub fn step(&mut self, net: &mut Network, grads: &Gradients) -> Result<()> {
        if grads.layers.len() != net.layers.len() {
            return Err(Error::Shape(format!(
                "{} gradient layers vs {} network layers",
                grads.layers.len(),
                net.layers.len()
            )));
        }
        for (idx, (layer, grad)) in net.layers.iter_mut().zip(&grads.layers).enumerate() {
            if grad.weights.data.len() != layer.weights.data.len()
                || grad.bias.len() != layer.bias.len()
            {
                return Err(Error::Shape(format!(
                    "gradient shape mismatch at layer {idx}"
                )));
            }
            let vw = &mut self.velocity_weights[idx];
            for ((w, &g), v) in layer
                .weights
                .data
                .iter_mut()
                .zip(&grad.weights.data)
                .zip(vw)
            {
                *v = self.momentum * *v + g;
                *w -= self.learning_rate * *v;
            }
            let vb = &mut self.velocity_bias[idx];
            for ((b, &g), v) in layer.bias.iter_mut().zip(&grad.bias).zip(vb) {
                *v = self.momentum * *v + g;
                *b -= self.learning_rate * *v;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::matrix::Matrix;
    use crate::nn::network::{Activation, DenseLayer};

    fn scalar_net(theta: f64) -> Network {
        Network {
            layers: vec![DenseLayer {
                weights: Matrix::from_vec(1, 1, vec![theta]).unwrap(),
                bias: vec![0.0],
                activation: Activation::Identity,
            }],
        }
    }

    fn scalar_grads(g: f64) -> Gradients {
        Gradients {
            layers: vec![crate::nn::network::LayerGradients {
                weights: Matrix::from_vec(1, 1, vec![g]).unwrap(),
                bias: vec![0.0],
            }],
        }
    }

    #[test]
    fn plain_gradient_step() {
        // momentum 0, lr 0.1, θ=1, g=2 → θ'=0.8
        let mut net = scalar_net(1.0);
        let mut opt = OptimizerState::new(&net, 0.1, 0.0).unwrap();
        opt.step(&mut net, &scalar_grads(2.0)).unwrap();
        assert!((net.layers[0].weights.data[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut net = scalar_net(0.37);
        let mut opt = OptimizerState::new(&net, 0.5, 0.9).unwrap();
        opt.step(&mut net, &scalar_grads(0.0)).unwrap();
        assert_eq!(net.layers[0].weights.data[0], 0.37);
    }

    #[test]
    fn momentum_recursion_hand_case() {
        // momentum 0.9, lr 1, θ=0, g=1 twice:
        // step 1: v=1, θ=-1; step 2: v=1.9, θ=-2.9
        let mut net = scalar_net(0.0);
        let mut opt = OptimizerState::new(&net, 1.0, 0.9).unwrap();
        opt.step(&mut net, &scalar_grads(1.0)).unwrap();
        assert!((net.layers[0].weights.data[0] + 1.0).abs() < 1e-15);
        opt.step(&mut net, &scalar_grads(1.0)).unwrap();
        assert!((net.layers[0].weights.data[0] + 2.9).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_hyperparameters() {
        let net = scalar_net(0.0);
        assert!(OptimizerState::new(&net, 0.0, 0.9).is_err());
        assert!(OptimizerState::new(&net, 0.1, 1.0).is_err());
    }
}
