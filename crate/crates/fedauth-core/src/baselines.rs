//! Comparison methods: FedAvg, split learning with weight handoff, and a
//! Mahalanobis-distance one-class model.

use serde::{Deserialize, Serialize};

use crate::datagen::LabeledDataset;
use crate::error::{Error, Result};
use crate::faa::{impression_from_features, AuthModel};
use crate::nn::matrix::{cholesky, invert_from_cholesky};
use crate::nn::{batch_softmax_xent, Matrix, Network, OptimizerState, TrainConfig};
use crate::protocol::{DeviceState, Direction, MethodTag, PayloadKind, Transcript};
use crate::rng::SeededRng;

/// Federated-averaging schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FedAvgConfig {
    pub rounds: usize,
    pub local_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    /// Fraction of devices participating each round.
    #[serde(default = "default_participation")]
    pub participation: f64,
}

fn default_participation() -> f64 {
    1.0
}

impl Default for FedAvgConfig {
    fn default() -> Self {
        Self {
            rounds: 20,
            local_epochs: 1,
            batch_size: 64,
            learning_rate: 0.001,
            momentum: 0.9,
            participation: 1.0,
        }
    }
}

impl FedAvgConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("fedavg.batch_size must be > 0".into()));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::Config("fedavg.learning_rate must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config("fedavg.momentum must lie in [0, 1)".into()));
        }
        if !(self.participation > 0.0 && self.participation <= 1.0) {
            return Err(Error::Config(
                "fedavg.participation must lie in (0, 1]".into(),
            ));
        }
        Ok(())
    }

    fn local_train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.local_epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            momentum: self.momentum,
        }
    }
}

/// Split-learning schedule. `cut` is the layer index separating the
/// device-side extractor from the server-side classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub cut: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 64,
            learning_rate: 0.001,
            momentum: 0.9,
            cut: 1,
        }
    }
}

impl SplitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("split.batch_size must be > 0".into()));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::Config("split.learning_rate must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config("split.momentum must lie in [0, 1)".into()));
        }
        if self.cut == 0 {
            return Err(Error::Config("split.cut must be >= 1".into()));
        }
        Ok(())
    }
}

/// nᵢ-weighted average of returned parameters, folded as deltas from the
/// current global model so that identical inputs are a bit-exact fixed
/// point.
pub fn fedavg_aggregate(global: &mut Network, locals: &[(Network, usize)]) -> Result<()> {
    if locals.is_empty() {
        return Err(Error::Input("nothing to aggregate".into()));
    }
    let total: f64 = locals.iter().map(|(_, n)| *n as f64).sum();
    if total <= 0.0 {
        return Err(Error::Input("aggregation weights sum to zero".into()));
    }
    for (layer_idx, layer) in global.layers.iter_mut().enumerate() {
        let weights_before = layer.weights.data.clone();
        let bias_before = layer.bias.clone();
        for (local, n) in locals {
            let alpha = *n as f64 / total;
            let other = &local.layers[layer_idx];
            if other.weights.data.len() != layer.weights.data.len() {
                return Err(Error::Shape(format!(
                    "local model layer {layer_idx} shape differs from global"
                )));
            }
            for ((g, &before), &l) in layer
                .weights
                .data
                .iter_mut()
                .zip(&weights_before)
                .zip(&other.weights.data)
            {
                *g += alpha * (l - before);
            }
            for ((g, &before), &l) in layer.bias.iter_mut().zip(&bias_before).zip(&other.bias) {
                *g += alpha * (l - before);
            }
        }
    }
    Ok(())
}

/// FedAvg: per round, broadcast the global model, run local SGD on each
/// participating device, and replace the global parameters with the
/// nᵢ-weighted average of the returned ones.
///
/// Zero rounds still broadcast the initial model once. Devices with empty
/// shards are skipped with a logged warning.
pub fn fedavg_train(
    devices: &[DeviceState],
    net_template: &Network,
    cfg: &FedAvgConfig,
    master_seed: u64,
) -> Result<(Network, Transcript)> {
    cfg.validate()?;
    if devices.is_empty() {
        return Err(Error::Config("no devices".into()));
    }
    let mut order: Vec<usize> = (0..devices.len()).collect();
    order.sort_by_key(|&i| devices[i].device_id);

    let mut global = net_template.clone();
    let param_units = global.param_count();
    let mut transcript = Transcript::new(MethodTag::Fedavg);
    let mut device_rngs: Vec<SeededRng> = devices
        .iter()
        .map(|d| SeededRng::from_seed(d.rng_seed))
        .collect();
    let mut participation_rng = SeededRng::substream(master_seed, "fedavg/participation");

    if cfg.rounds == 0 {
        for &i in &order {
            transcript.record(
                Direction::ServerToDevice,
                devices[i].device_id,
                0,
                PayloadKind::ModelParams,
                param_units,
            )?;
        }
        return Ok((global, transcript));
    }

    for round in 0..cfg.rounds {
        let mut participants: Vec<usize> = if cfg.participation >= 1.0 {
            order.clone()
        } else {
            let count =
                ((cfg.participation * order.len() as f64).round() as usize).clamp(1, order.len());
            let mut pool = order.clone();
            participation_rng.shuffle(&mut pool);
            pool.truncate(count);
            pool.sort_by_key(|&i| devices[i].device_id);
            pool
        };
        participants.retain(|&i| {
            if devices[i].local_data.is_empty() {
                eprintln!(
                    "warning: device {} has no samples, skipping round {round}",
                    devices[i].device_id
                );
                false
            } else {
                true
            }
        });
        if participants.is_empty() {
            return Err(Error::Config("no device has any samples".into()));
        }

        let mut locals: Vec<(Network, usize)> = Vec::with_capacity(participants.len());
        for &i in &participants {
            let device = &devices[i];
            transcript.record(
                Direction::ServerToDevice,
                device.device_id,
                round,
                PayloadKind::ModelParams,
                param_units,
            )?;
            let mut local = global.clone();
            if cfg.local_epochs > 0 {
                let x = device.local_data.feature_matrix();
                let labels = device.local_data.labels();
                crate::nn::fit_classifier(
                    &mut local,
                    &x,
                    &labels,
                    &cfg.local_train_config(),
                    &mut device_rngs[i],
                )?;
            }
            transcript.record(
                Direction::DeviceToServer,
                device.device_id,
                round,
                PayloadKind::ModelParams,
                param_units,
            )?;
            locals.push((local, device.local_data.len()));
        }
        fedavg_aggregate(&mut global, &locals)?;
    }
    Ok((global, transcript))
}

/// Split learning with weight relay: devices take turns in ascending id
/// order; the active device pushes cut-layer activations (plus labels) up,
/// the server updates its classifier part and returns activation gradients,
/// and the device-side extractor is relayed through the server to the next
/// device. Device-side optimizer state stays on each device.
pub fn split_learning_train(
    devices: &[DeviceState],
    f_template: &Network,
    c_server: &Network,
    cfg: &SplitConfig,
) -> Result<(AuthModel, Transcript)> {
    cfg.validate()?;
    if devices.is_empty() {
        return Err(Error::Config("no devices".into()));
    }
    if f_template.layers.len() != cfg.cut {
        return Err(Error::Config(format!(
            "cut {} does not match the {}-layer device network",
            cfg.cut,
            f_template.layers.len()
        )));
    }
    if c_server.input_dim() != f_template.output_dim() {
        return Err(Error::Config(format!(
            "server network expects {} features, device network yields {}",
            c_server.input_dim(),
            f_template.output_dim()
        )));
    }
    let mut order: Vec<usize> = (0..devices.len()).collect();
    order.sort_by_key(|&i| devices[i].device_id);

    let mut transcript = Transcript::new(MethodTag::SplitLearning);
    let mut relayed_f = f_template.clone();
    let f_units = relayed_f.param_count();
    let feature_dim = relayed_f.output_dim();
    let mut classifier = c_server.clone();
    let mut server_opt = OptimizerState::new(&classifier, cfg.learning_rate, cfg.momentum)?;
    let mut device_opts: Vec<OptimizerState> = devices
        .iter()
        .map(|_| OptimizerState::new(f_template, cfg.learning_rate, cfg.momentum))
        .collect::<Result<_>>()?;
    let mut device_rngs: Vec<SeededRng> = devices
        .iter()
        .map(|d| SeededRng::from_seed(d.rng_seed))
        .collect();

    for epoch in 0..cfg.epochs {
        for &i in &order {
            let device = &devices[i];
            if device.local_data.is_empty() {
                eprintln!(
                    "warning: device {} has no samples, skipping epoch {epoch}",
                    device.device_id
                );
                continue;
            }
            // Hand the current extractor to the active device.
            transcript.record(
                Direction::ServerToDevice,
                device.device_id,
                epoch,
                PayloadKind::ModelParams,
                f_units,
            )?;
            let mut f_local = relayed_f;
            let x = device.local_data.feature_matrix();
            let labels = device.local_data.labels();
            let mut sample_order: Vec<usize> = (0..x.rows).collect();
            device_rngs[i].shuffle(&mut sample_order);
            for chunk in sample_order.chunks(cfg.batch_size) {
                let mut bx = Matrix::zeros(chunk.len(), x.cols);
                let mut by = Vec::with_capacity(chunk.len());
                for (r, &idx) in chunk.iter().enumerate() {
                    bx.data[r * x.cols..(r + 1) * x.cols].copy_from_slice(x.row(idx));
                    by.push(labels[idx]);
                }
                let (features, f_cache) = f_local.forward(&bx)?;
                transcript.record(
                    Direction::DeviceToServer,
                    device.device_id,
                    epoch,
                    PayloadKind::ActivationBatch,
                    chunk.len() * feature_dim + chunk.len(),
                )?;
                let (logits, c_cache) = classifier.forward(&features)?;
                let (_, dlogits) = batch_softmax_xent(&logits, &by)?;
                let (c_grads, dfeatures) = classifier.backward(&c_cache, &dlogits)?;
                server_opt.step(&mut classifier, &c_grads)?;
                transcript.record(
                    Direction::ServerToDevice,
                    device.device_id,
                    epoch,
                    PayloadKind::GradientBatch,
                    chunk.len() * feature_dim,
                )?;
                let (f_grads, _) = f_local.backward(&f_cache, &dfeatures)?;
                device_opts[i].step(&mut f_local, &f_grads)?;
            }
            // Relay the updated extractor back through the server.
            transcript.record(
                Direction::DeviceToServer,
                device.device_id,
                epoch,
                PayloadKind::ModelParams,
                f_units,
            )?;
            relayed_f = f_local;
        }
    }

    let model = AuthModel {
        num_users: classifier.output_dim(),
        feature_extractor: relayed_f,
        classifier,
    };
    model.validate()?;
    Ok((model, transcript))
}

/// One-class model for a single enrolled user: feature mean and inverse
/// regularized covariance. The score is the Mahalanobis distance, so higher
/// means more likely unauthorized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneClassModel {
    pub mu: Vec<f64>,
    pub sigma_inv: Matrix,
    pub threshold: f64,
}

/// Fit from pre-computed feature rows: μ and (Σ + eps·I)⁻¹.
pub fn oneclass_fit_features(features: &Matrix, reg_eps: f64) -> Result<OneClassModel> {
    let imp = impression_from_features(0, features)?;
    let d = imp.sigma.rows;
    let mut regularized = imp.sigma;
    for i in 0..d {
        regularized.data[i * d + i] += reg_eps;
    }
    let l = cholesky(&regularized).ok_or_else(|| {
        Error::Numeric(format!(
            "one-class covariance singular even with eps {reg_eps}"
        ))
    })?;
    Ok(OneClassModel {
        mu: imp.mu,
        sigma_inv: invert_from_cholesky(&l),
        threshold: 0.0,
    })
}

/// Fit a one-class model on one user's device data through the extractor.
pub fn oneclass_fit(
    extractor: &Network,
    device_data: &LabeledDataset,
    reg_eps: f64,
) -> Result<OneClassModel> {
    if device_data.is_empty() {
        return Err(Error::Input("device holds no samples".into()));
    }
    let user = device_data.samples[0].label;
    if device_data.samples.iter().any(|s| s.label != user) {
        return Err(Error::Input(
            "one-class fit needs a single user's data".into(),
        ));
    }
    let (features, _) = extractor.forward(&device_data.feature_matrix())?;
    oneclass_fit_features(&features, reg_eps)
}

/// Mahalanobis distance of F(x) from the model's mean.
pub fn oneclass_score(model: &OneClassModel, extractor: &Network, x: &[f64]) -> Result<f64> {
    let f = extractor.forward_one(x)?;
    oneclass_score_features(model, &f)
}

pub fn oneclass_score_features(model: &OneClassModel, features: &[f64]) -> Result<f64> {
    let d = model.mu.len();
    if features.len() != d {
        return Err(Error::Shape(format!(
            "feature width {} vs model width {d}",
            features.len()
        )));
    }
    let z: Vec<f64> = features.iter().zip(&model.mu).map(|(f, m)| f - m).collect();
    let mut quad = 0.0;
    for i in 0..d {
        for j in 0..d {
            quad += z[i] * model.sigma_inv.get(i, j) * z[j];
        }
    }
    Ok(quad.max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{gen_population, PopulationSpec, Sample};
    use crate::nn::{split_model, Activation, DenseLayer};

    fn scalar_net(theta: f64) -> Network {
        Network {
            layers: vec![DenseLayer {
                weights: Matrix::from_vec(1, 1, vec![theta]).unwrap(),
                bias: vec![0.0],
                activation: Activation::Identity,
            }],
        }
    }

    #[test]
    fn aggregate_of_identical_models_is_bit_exact() {
        let mut rng = SeededRng::from_seed(30);
        let template = Network::dense(&[3, 5, 2], &mut rng).unwrap();
        let mut global = template.clone();
        let locals = vec![
            (template.clone(), 7),
            (template.clone(), 3),
            (template.clone(), 11),
        ];
        fedavg_aggregate(&mut global, &locals).unwrap();
        assert_eq!(global, template);
    }

    #[test]
    fn aggregate_equal_weights_hand_case() {
        let mut global = scalar_net(0.0);
        fedavg_aggregate(&mut global, &[(scalar_net(1.0), 5), (scalar_net(3.0), 5)]).unwrap();
        assert!((global.layers[0].weights.data[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn aggregate_sample_weighted_hand_case() {
        // n₁ = 1 at θ = 1, n₂ = 3 at θ = 3 → 0.25·1 + 0.75·3 = 2.5.
        let mut global = scalar_net(0.0);
        fedavg_aggregate(&mut global, &[(scalar_net(1.0), 1), (scalar_net(3.0), 3)]).unwrap();
        assert!((global.layers[0].weights.data[0] - 2.5).abs() < 1e-15);
    }

    fn toy_devices(num_users: usize, seed: u64) -> (Vec<DeviceState>, LabeledDataset) {
        let pop = gen_population(&PopulationSpec {
            num_users,
            input_dim: 4,
            samples_per_user: 40,
            separation: 8.0,
            within_scale: 0.8,
            seed,
        })
        .unwrap();
        let devices = (0..num_users)
            .map(|user| {
                let idx: Vec<usize> = pop
                    .data
                    .samples
                    .iter()
                    .enumerate()
                    .filter(|(_, s)| s.label == user)
                    .map(|(i, _)| i)
                    .collect();
                DeviceState::new(user as u64, pop.data.subset(&idx), seed ^ 0xfed)
            })
            .collect();
        (devices, pop.data)
    }

    #[test]
    fn fedavg_zero_rounds_is_initial_broadcast_only() {
        let (devices, _) = toy_devices(3, 300);
        let mut rng = SeededRng::from_seed(301);
        let template = Network::dense(&[4, 6, 3], &mut rng).unwrap();
        let cfg = FedAvgConfig {
            rounds: 0,
            ..FedAvgConfig::default()
        };
        let (global, transcript) = fedavg_train(&devices, &template, &cfg, 1).unwrap();
        assert_eq!(global, template);
        assert_eq!(transcript.uplink_messages(), 0);
        assert_eq!(transcript.messages().len(), devices.len());
        assert!(transcript.messages().iter().all(|m| {
            m.payload == PayloadKind::ModelParams && m.direction == Direction::ServerToDevice
        }));
    }

    #[test]
    fn fedavg_message_count_is_two_k_r() {
        let (devices, _) = toy_devices(4, 302);
        let mut rng = SeededRng::from_seed(303);
        let template = Network::dense(&[4, 6, 4], &mut rng).unwrap();
        let cfg = FedAvgConfig {
            rounds: 5,
            local_epochs: 1,
            batch_size: 16,
            learning_rate: 0.01,
            momentum: 0.9,
            participation: 1.0,
        };
        let (_, transcript) = fedavg_train(&devices, &template, &cfg, 2).unwrap();
        assert_eq!(transcript.messages().len(), 2 * 4 * 5);
        assert_eq!(transcript.uplink_messages(), 4 * 5);
        assert_eq!(transcript.round_count(), 5);
    }

    #[test]
    fn fedavg_fixed_point_with_zero_local_epochs() {
        let (devices, _) = toy_devices(3, 304);
        let mut rng = SeededRng::from_seed(305);
        let template = Network::dense(&[4, 5, 3], &mut rng).unwrap();
        let cfg = FedAvgConfig {
            rounds: 3,
            local_epochs: 0,
            ..FedAvgConfig::default()
        };
        let (global, _) = fedavg_train(&devices, &template, &cfg, 3).unwrap();
        assert_eq!(global, template);
    }

    #[test]
    fn fedavg_is_deterministic() {
        let (devices, _) = toy_devices(3, 306);
        let mut rng = SeededRng::from_seed(307);
        let template = Network::dense(&[4, 6, 3], &mut rng).unwrap();
        let cfg = FedAvgConfig {
            rounds: 4,
            local_epochs: 2,
            batch_size: 8,
            learning_rate: 0.02,
            momentum: 0.9,
            participation: 1.0,
        };
        let (g1, t1) = fedavg_train(&devices, &template, &cfg, 11).unwrap();
        let (g2, t2) = fedavg_train(&devices, &template, &cfg, 11).unwrap();
        assert_eq!(g1, g2);
        assert_eq!(t1, t2);
    }

    #[test]
    fn split_learning_gradients_match_monolithic_backprop() {
        // One batch through the cut-and-relay path must produce the same
        // parameter gradients as whole-network backprop.
        let mut rng = SeededRng::from_seed(310);
        let whole = Network::dense(&[4, 7, 5, 3], &mut rng).unwrap();
        let (f, c) = split_model(&whole, 2).unwrap();
        let mut xr = SeededRng::from_seed(311);
        let mut x = Matrix::zeros(6, 4);
        for v in x.data.iter_mut() {
            *v = xr.uniform_in(-1.0, 1.0);
        }
        let labels = vec![0, 1, 2, 0, 1, 2];

        let whole_grads = crate::nn::analytic_gradients(&whole, &x, &labels).unwrap();

        let (features, f_cache) = f.forward(&x).unwrap();
        let (logits, c_cache) = c.forward(&features).unwrap();
        let (_, dlogits) = batch_softmax_xent(&logits, &labels).unwrap();
        let (c_grads, dfeatures) = c.backward(&c_cache, &dlogits).unwrap();
        let (f_grads, _) = f.backward(&f_cache, &dfeatures).unwrap();

        for (split_layer, whole_layer) in f_grads
            .layers
            .iter()
            .chain(c_grads.layers.iter())
            .zip(&whole_grads.layers)
        {
            for (a, b) in split_layer
                .weights
                .data
                .iter()
                .zip(&whole_layer.weights.data)
            {
                assert!((a - b).abs() <= 1e-10, "weight grad {a} vs {b}");
            }
            for (a, b) in split_layer.bias.iter().zip(&whole_layer.bias) {
                assert!((a - b).abs() <= 1e-10, "bias grad {a} vs {b}");
            }
        }
    }

    #[test]
    fn split_learning_trains_separable_data() {
        let (devices, _) = toy_devices(2, 312);
        let mut rng = SeededRng::from_seed(313);
        let whole = Network::dense(&[4, 8, 6, 2], &mut rng).unwrap();
        let (f, c) = split_model(&whole, 2).unwrap();
        let cfg = SplitConfig {
            epochs: 8,
            batch_size: 8,
            learning_rate: 0.02,
            momentum: 0.9,
            cut: 2,
        };
        let (model, transcript) = split_learning_train(&devices, &f, &c, &cfg).unwrap();
        let mut correct = 0usize;
        let mut total = 0usize;
        for device in &devices {
            for s in &device.local_data.samples {
                let logits = model.logits(&s.x).unwrap();
                correct += usize::from(crate::nn::argmax(&logits) == s.label);
                total += 1;
            }
        }
        let acc = correct as f64 / total as f64;
        assert!(acc >= 0.95, "accuracy {acc}");
        assert!(transcript.round_count() == cfg.epochs);
    }

    #[test]
    fn split_learning_message_counts() {
        let (devices, _) = toy_devices(3, 314);
        let mut rng = SeededRng::from_seed(315);
        let whole = Network::dense(&[4, 6, 3], &mut rng).unwrap();
        let (f, c) = split_model(&whole, 1).unwrap();
        let cfg = SplitConfig {
            epochs: 4,
            batch_size: 16,
            learning_rate: 0.01,
            momentum: 0.9,
            cut: 1,
        };
        let (_, transcript) = split_learning_train(&devices, &f, &c, &cfg).unwrap();
        // 40 samples per device in batches of 16 → 3 batches per device.
        let batches_per_epoch = 3 * 3;
        assert_eq!(
            transcript.uplink_messages_of_kind(PayloadKind::ActivationBatch),
            cfg.epochs * batches_per_epoch
        );
        // One extractor upload per device turn.
        assert_eq!(
            transcript.uplink_messages_of_kind(PayloadKind::ModelParams),
            cfg.epochs * devices.len()
        );
        assert_eq!(
            transcript.uplink_messages(),
            cfg.epochs * (batches_per_epoch + devices.len())
        );
    }

    #[test]
    fn oneclass_score_zero_at_mean() {
        let mut data = LabeledDataset::new(1, 2);
        let mut rng = SeededRng::from_seed(320);
        for _ in 0..50 {
            data.samples.push(Sample {
                x: vec![1.0 + rng.standard_normal(), -2.0 + rng.standard_normal()],
                label: 0,
            });
        }
        let id = Network {
            layers: vec![DenseLayer {
                weights: Matrix::identity(2),
                bias: vec![0.0, 0.0],
                activation: Activation::Identity,
            }],
        };
        let model = oneclass_fit(&id, &data, 1e-6).unwrap();
        let score = oneclass_score_features(&model, &model.mu.clone()).unwrap();
        assert!(score.abs() < 1e-12);
    }

    #[test]
    fn oneclass_identity_covariance_is_euclidean() {
        let model = OneClassModel {
            mu: vec![1.0, 2.0, 3.0],
            sigma_inv: Matrix::identity(3),
            threshold: 0.0,
        };
        let x = [4.0, 6.0, 3.0];
        let score = oneclass_score_features(&model, &x).unwrap();
        let euclid = ((4.0_f64 - 1.0).powi(2) + (6.0_f64 - 2.0).powi(2)).sqrt();
        assert!((score - euclid).abs() < 1e-12);
    }

    #[test]
    fn oneclass_hand_mahalanobis() {
        // μ = 0, Σ = diag(1, 4), f = (1, 2) → √(1 + 1) = √2.
        let mut sigma_inv = Matrix::zeros(2, 2);
        sigma_inv.set(0, 0, 1.0);
        sigma_inv.set(1, 1, 0.25);
        let model = OneClassModel {
            mu: vec![0.0, 0.0],
            sigma_inv,
            threshold: 0.0,
        };
        let score = oneclass_score_features(&model, &[1.0, 2.0]).unwrap();
        assert!((score - 2.0_f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn oneclass_score_invariant_under_translation_and_axis_scaling() {
        let mut rng = SeededRng::from_seed(321);
        let n = 80;
        let mut rows = Vec::new();
        for _ in 0..n {
            rows.push(vec![
                rng.standard_normal(),
                2.0 * rng.standard_normal(),
                0.5 * rng.standard_normal(),
            ]);
        }
        let features = Matrix::from_rows(&rows).unwrap();
        let probe = vec![1.2, -0.7, 0.4];

        // Near-zero eps so the regularizer does not perturb the invariance.
        let eps = 1e-12;
        let base = oneclass_fit_features(&features, eps).unwrap();
        let base_score = oneclass_score_features(&base, &probe).unwrap();

        // Translation.
        let t = [5.0, -3.0, 9.0];
        let shifted: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| r.iter().zip(&t).map(|(v, tv)| v + tv).collect())
            .collect();
        let shifted_model =
            oneclass_fit_features(&Matrix::from_rows(&shifted).unwrap(), eps).unwrap();
        let shifted_probe: Vec<f64> = probe.iter().zip(&t).map(|(v, tv)| v + tv).collect();
        let shifted_score = oneclass_score_features(&shifted_model, &shifted_probe).unwrap();
        assert!(
            (base_score - shifted_score).abs() < 1e-6,
            "{base_score} vs {shifted_score}"
        );

        // Axis scaling.
        let scales = [2.0, 0.25, 10.0];
        let scaled: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| r.iter().zip(&scales).map(|(v, s)| v * s).collect())
            .collect();
        let scaled_model =
            oneclass_fit_features(&Matrix::from_rows(&scaled).unwrap(), eps).unwrap();
        let scaled_probe: Vec<f64> = probe.iter().zip(&scales).map(|(v, s)| v * s).collect();
        let scaled_score = oneclass_score_features(&scaled_model, &scaled_probe).unwrap();
        assert!(
            (base_score - scaled_score).abs() < 1e-6,
            "{base_score} vs {scaled_score}"
        );
    }

    #[test]
    fn oneclass_rejects_degenerate_covariance_without_regularization() {
        // Two identical rows give Σ = 0; eps = 0 cannot factorize.
        let features = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert!(matches!(
            oneclass_fit_features(&features, 0.0),
            Err(Error::Numeric(_))
        ));
    }
}
