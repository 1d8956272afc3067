//! Minimal dense neural-network engine: forward/backward passes, softmax
//! cross-entropy, SGD with momentum, entropy, gradient verification, and
//! model splitting.

pub mod gradcheck;
pub mod loss;
pub mod matrix;
pub mod network;
pub mod optim;
pub mod train;

pub use gradcheck::{analytic_gradients, grad_check};
pub use loss::{batch_softmax_xent, entropy, softmax, softmax_xent};
pub use matrix::Matrix;
pub use network::{split_model, Activation, DenseLayer, ForwardCache, Gradients, Network};
pub use optim::OptimizerState;
pub use train::{argmax, classification_accuracy, fit_classifier, TrainConfig, TrainStats};
