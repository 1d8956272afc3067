//! Simulation core for federated active authentication at desk scale.
//!
//! The crate provides:
//! - a minimal dense neural-network engine ([`nn`]),
//! - synthetic populations and qIID-controlled device partitions ([`datagen`]),
//! - typed device↔server transcripts for communication accounting ([`protocol`]),
//! - impression-based federated training of an authentication model ([`faa`]),
//! - FedAvg, split-learning, and one-class baselines ([`baselines`]),
//! - entropy-score evaluation and detection-accuracy metrics ([`eval`]),
//! - reproducible experiment drivers over all of the above ([`experiments`]).
//!
//! Every random draw descends from a single master seed through named
//! substreams ([`rng`]), so a (config, seed) pair fully determines every
//! numeric output.

pub mod baselines;
pub mod datagen;
pub mod error;
pub mod eval;
pub mod experiments;
pub mod faa;
pub mod nn;
pub mod protocol;
pub mod rng;

pub use baselines::{FedAvgConfig, OneClassModel, SplitConfig};
pub use datagen::{LabeledDataset, Partition, PopulationSpec};
pub use error::{Error, Result};
pub use eval::{AdaReport, AuthScorer, ScoreSet};
pub use experiments::ExperimentConfig;
pub use faa::{AuthModel, FaaConfig, UserImpression};
pub use nn::{Matrix, Network, TrainConfig};
pub use protocol::{DeviceState, Message, MethodTag, PayloadKind, Transcript};
pub use rng::SeededRng;
