//! Typed device↔server messages and transcripts for communication
//! accounting.
//!
//! The payload type system is the privacy boundary: there is no variant
//! able to carry raw (sample, label) pairs from a device to the server.
//! Only model parameters, feature statistics, cut-layer activations,
//! gradients, and scalars can cross.

use serde::{Deserialize, Serialize};

use crate::datagen::LabeledDataset;
use crate::error::{Error, Result};
use crate::nn::Network;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    DeviceToServer,
    ServerToDevice,
}

/// What a message carries. Sizes are tracked on the [`Message`], in units
/// of real numbers, so the accounting stays serialization-agnostic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayloadKind {
    /// Weights and biases of a network (or network part).
    ModelParams,
    /// Per-user feature statistics: mean, covariance, sample count.
    ImpressionPayload,
    /// Cut-layer activations for a batch, plus the batch labels.
    ActivationBatch,
    /// Gradients w.r.t. cut-layer activations for a batch.
    GradientBatch,
    /// A single real value.
    Scalar,
}

impl PayloadKind {
    pub const ALL: [PayloadKind; 5] = [
        PayloadKind::ModelParams,
        PayloadKind::ImpressionPayload,
        PayloadKind::ActivationBatch,
        PayloadKind::GradientBatch,
        PayloadKind::Scalar,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodTag {
    Faa,
    Fedavg,
    SplitLearning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub direction: Direction,
    pub device_id: u64,
    pub round: usize,
    pub payload: PayloadKind,
    /// Exact count of real numbers in the payload.
    pub size_units: usize,
}

/// Append-only, per-device round-monotone log of every cross-boundary
/// payload in one simulated run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Transcript {
    pub method_tag: MethodTag,
    messages: Vec<Message>,
}

impl Transcript {
    pub fn new(method_tag: MethodTag) -> Self {
        Self {
            method_tag,
            messages: Vec::new(),
        }
    }

    pub fn record(
        &mut self,
        direction: Direction,
        device_id: u64,
        round: usize,
        payload: PayloadKind,
        size_units: usize,
    ) -> Result<()> {
        if let Some(last) = self
            .messages
            .iter()
            .rev()
            .find(|m| m.device_id == device_id)
        {
            if round < last.round {
                return Err(Error::Input(format!(
                    "round {round} precedes round {} already logged for device {device_id}",
                    last.round
                )));
            }
        }
        self.messages.push(Message {
            direction,
            device_id,
            round,
            payload,
            size_units,
        });
        Ok(())
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    /// Total real numbers sent device→server.
    pub fn uplink_cost(&self) -> usize {
        self.messages
            .iter()
            .filter(|m| m.direction == Direction::DeviceToServer)
            .map(|m| m.size_units)
            .sum()
    }

    /// Total real numbers sent server→device.
    pub fn downlink_cost(&self) -> usize {
        self.messages
            .iter()
            .filter(|m| m.direction == Direction::ServerToDevice)
            .map(|m| m.size_units)
            .sum()
    }

    pub fn uplink_messages(&self) -> usize {
        self.messages
            .iter()
            .filter(|m| m.direction == Direction::DeviceToServer)
            .count()
    }

    pub fn uplink_messages_of_kind(&self, kind: PayloadKind) -> usize {
        self.messages
            .iter()
            .filter(|m| m.direction == Direction::DeviceToServer && m.payload == kind)
            .count()
    }

    /// Number of communication rounds: max round index + 1 (0 when empty).
    pub fn round_count(&self) -> usize {
        self.messages.iter().map(|m| m.round + 1).max().unwrap_or(0)
    }

    /// Distinct payload kinds appearing in the transcript.
    pub fn payload_kinds(&self) -> Vec<PayloadKind> {
        let mut kinds = Vec::new();
        for m in &self.messages {
            if !kinds.contains(&m.payload) {
                kinds.push(m.payload);
            }
        }
        kinds
    }

    /// Serialize as one JSON document with totals.
    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Totals {
            uplink_units: usize,
            downlink_units: usize,
            uplink_messages: usize,
            message_count: usize,
            rounds: usize,
        }
        #[derive(Serialize)]
        struct Export<'a> {
            method_tag: MethodTag,
            messages: &'a [Message],
            totals: Totals,
        }
        let export = Export {
            method_tag: self.method_tag,
            messages: &self.messages,
            totals: Totals {
                uplink_units: self.uplink_cost(),
                downlink_units: self.downlink_cost(),
                uplink_messages: self.uplink_messages(),
                message_count: self.messages.len(),
                rounds: self.round_count(),
            },
        };
        Ok(serde_json::to_string_pretty(&export)?)
    }
}

/// One simulated device: its id, private data shard, optional local model
/// copy, and the seed of its private random substream.
///
/// The shard never leaves the device; only statistics, parameters,
/// activations, or gradients are ever logged to a transcript.
#[derive(Debug, Clone)]
pub struct DeviceState {
    pub device_id: u64,
    pub local_data: LabeledDataset,
    pub local_model: Option<Network>,
    pub rng_seed: u64,
}

impl DeviceState {
    pub fn new(device_id: u64, local_data: LabeledDataset, master_seed: u64) -> Self {
        Self {
            device_id,
            local_data,
            local_model: None,
            rng_seed: crate::rng::device_seed(master_seed, device_id),
        }
    }
}

/// Size in real numbers of an impression payload for feature width `d`:
/// mean (d) + covariance (d² full, d diagonal-only) + sample count (1).
pub fn impression_size_units(feature_dim: usize, diagonal_only: bool) -> usize {
    let cov = if diagonal_only {
        feature_dim
    } else {
        feature_dim * feature_dim
    };
    feature_dim + cov + 1
}
