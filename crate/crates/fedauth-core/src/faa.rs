//! Impression-based federated training of an authentication model.
//!
//! The pipeline has three steps:
//! 1. train a full network on a disjoint base dataset at the server, then
//!    split it into a feature extractor F and a classifier C;
//! 2. broadcast F; each device reduces its private samples to a *user
//!    impression* — the feature mean μᵢ, covariance Σᵢ, and count nᵢ — and
//!    uploads only that;
//! 3. the server resamples M synthetic features per user from 𝒩(μᵢ, Σᵢ)
//!    and fine-tunes C on the K·M synthetic rows.
//!
//! Each device talks to the server exactly once, regardless of how many
//! epochs the server trains.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datagen::LabeledDataset;
use crate::error::{Error, Result};
use crate::nn::{
    fit_classifier, split_model, Activation, DenseLayer, Matrix, Network, TrainConfig,
};
use crate::protocol::{
    impression_size_units, DeviceState, Direction, MethodTag, PayloadKind, Transcript,
};
use crate::rng::SeededRng;

/// Per-user feature statistics computed on-device: sample count, mean, and
/// covariance of the extractor outputs (population normalization, 1/n).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserImpression {
    pub user_id: usize,
    pub n: usize,
    pub mu: Vec<f64>,
    pub sigma: Matrix,
}

impl UserImpression {
    pub fn feature_dim(&self) -> usize {
        self.mu.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Input("impression needs n >= 1".into()));
        }
        if self.sigma.rows != self.mu.len() || self.sigma.cols != self.mu.len() {
            return Err(Error::Shape(format!(
                "covariance {}x{} does not match mean width {}",
                self.sigma.rows,
                self.sigma.cols,
                self.mu.len()
            )));
        }
        if !self.sigma.is_symmetric(1e-9) {
            return Err(Error::Input("covariance is not symmetric".into()));
        }
        Ok(())
    }

    /// Drop the off-diagonal covariance entries (ablation mode).
    pub fn diagonal_only(&self) -> UserImpression {
        let d = self.mu.len();
        let mut sigma = Matrix::zeros(d, d);
        for i in 0..d {
            sigma.set(i, i, self.sigma.get(i, i));
        }
        UserImpression {
            sigma,
            ..self.clone()
        }
    }
}

/// Hyperparameters of the server-side fine-tuning step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaaConfig {
    /// Synthetic samples drawn per user (M).
    pub samples_per_user: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    /// Covariance regularization scale for the Cholesky factorization.
    pub cov_reg_eps: f64,
    /// Ablation: ship and sample diagonal covariances only.
    #[serde(default)]
    pub diag_only: bool,
}

impl Default for FaaConfig {
    fn default() -> Self {
        Self {
            samples_per_user: 200,
            epochs: 100,
            batch_size: 64,
            learning_rate: 0.001,
            momentum: 0.9,
            cov_reg_eps: 1e-6,
            diag_only: false,
        }
    }
}

impl FaaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples_per_user == 0 {
            return Err(Error::Config("faa.samples_per_user must be > 0".into()));
        }
        if self.cov_reg_eps <= 0.0 {
            return Err(Error::Config("faa.cov_reg_eps must be > 0".into()));
        }
        self.train_config().validate()
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            momentum: self.momentum,
        }
    }
}

/// The deployable authentication model: frozen feature extractor plus the
/// fine-tuned K-way classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuthModel {
    pub feature_extractor: Network,
    pub classifier: Network,
    pub num_users: usize,
}

impl AuthModel {
    pub fn validate(&self) -> Result<()> {
        if self.classifier.input_dim() != self.feature_extractor.output_dim() {
            return Err(Error::Shape(format!(
                "classifier expects {} features, extractor yields {}",
                self.classifier.input_dim(),
                self.feature_extractor.output_dim()
            )));
        }
        if self.classifier.output_dim() != self.num_users {
            return Err(Error::Shape(format!(
                "classifier head is {}-way, model enrolls {} users",
                self.classifier.output_dim(),
                self.num_users
            )));
        }
        Ok(())
    }

    /// Raw logits C(F(x)) for one input.
    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        let features = self.feature_extractor.forward_one(x)?;
        self.classifier.forward_one(&features)
    }
}

const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct AuthModelFile {
    version: u32,
    model: AuthModel,
}

/// Write an authentication model as a versioned JSON parameter dump.
pub fn save_auth_model(model: &AuthModel, path: &Path) -> Result<()> {
    let file = AuthModelFile {
        version: MODEL_FORMAT_VERSION,
        model: model.clone(),
    };
    std::fs::write(path, serde_json::to_string_pretty(&file)?)?;
    Ok(())
}

/// Load a model written by [`save_auth_model`].
pub fn load_auth_model(path: &Path) -> Result<AuthModel> {
    let text = std::fs::read_to_string(path)?;
    let file: AuthModelFile = serde_json::from_str(&text)?;
    if file.version != MODEL_FORMAT_VERSION {
        return Err(Error::Input(format!(
            "unsupported model format version {}",
            file.version
        )));
    }
    file.model.validate()?;
    Ok(file.model)
}

/// Step-1: train the full network on the base dataset by minibatch SGD.
pub fn train_base(
    net: &mut Network,
    base_data: &LabeledDataset,
    hyperparams: &TrainConfig,
    rng: &mut SeededRng,
) -> Result<()> {
    if net.output_dim() != base_data.num_classes {
        return Err(Error::Config(format!(
            "network head is {}-way but base data has {} classes",
            net.output_dim(),
            base_data.num_classes
        )));
    }
    if hyperparams.epochs == 0 {
        return Ok(());
    }
    let x = base_data.feature_matrix();
    let labels = base_data.labels();
    fit_classifier(net, &x, &labels, hyperparams, rng)?;
    Ok(())
}

/// Mean and population covariance of pre-computed feature rows.
pub fn impression_from_features(user_id: usize, features: &Matrix) -> Result<UserImpression> {
    let n = features.rows;
    if n == 0 {
        return Err(Error::Input(
            "cannot estimate an impression from no samples".into(),
        ));
    }
    let d = features.cols;
    let inv_n = 1.0 / n as f64;
    let mut mu = vec![0.0; d];
    for r in 0..n {
        for (m, &v) in mu.iter_mut().zip(features.row(r)) {
            *m += v;
        }
    }
    for m in mu.iter_mut() {
        *m *= inv_n;
    }
    let mut sigma = Matrix::zeros(d, d);
    for r in 0..n {
        let row = features.row(r);
        for i in 0..d {
            let di = row[i] - mu[i];
            for j in i..d {
                let dj = row[j] - mu[j];
                sigma.data[i * d + j] += di * dj;
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            let v = sigma.get(i, j) * inv_n;
            sigma.set(i, j, v);
            sigma.set(j, i, v);
        }
    }
    Ok(UserImpression {
        user_id,
        n,
        mu,
        sigma,
    })
}

/// Step-2 (device side): run the device's samples through the extractor and
/// reduce them to a user impression. All samples must belong to one user.
pub fn estimate_impression(
    extractor: &Network,
    device_data: &LabeledDataset,
) -> Result<UserImpression> {
    if device_data.is_empty() {
        return Err(Error::Input("device holds no samples".into()));
    }
    let user_id = device_data.samples[0].label;
    if device_data.samples.iter().any(|s| s.label != user_id) {
        return Err(Error::Input("device data mixes users".into()));
    }
    let (features, _) = extractor.forward(&device_data.feature_matrix())?;
    impression_from_features(user_id, &features)
}

/// Cholesky factor of `sigma + eps'·I` where eps' = eps·max(trace/d, 1).
///
/// Retries with eps ×10 up to 3 times when the factorization fails; a
/// persistent failure is a numeric error.
pub fn chol_psd(sigma: &Matrix, eps: f64) -> Result<Matrix> {
    if !sigma.is_symmetric(1e-9) {
        return Err(Error::Input("covariance is not symmetric".into()));
    }
    let d = sigma.rows;
    let trace: f64 = (0..d).map(|i| sigma.get(i, i)).sum();
    let scale = (trace / d as f64).max(1.0);
    let mut eps_k = eps;
    for _ in 0..4 {
        let mut regularized = sigma.clone();
        let ridge = eps_k * scale;
        for i in 0..d {
            regularized.data[i * d + i] += ridge;
        }
        if let Some(l) = crate::nn::matrix::cholesky(&regularized) {
            return Ok(l);
        }
        eps_k *= 10.0;
    }
    Err(Error::Numeric(format!(
        "cholesky failed for {d}x{d} covariance even at eps {eps_k}"
    )))
}

/// Draw exactly `count` synthetic features f = μ + L·z with z standard
/// normal from the given stream.
pub fn sample_user_features(
    impression: &UserImpression,
    count: usize,
    cov_reg_eps: f64,
    rng: &mut SeededRng,
) -> Result<Vec<(Vec<f64>, usize)>> {
    impression.validate()?;
    let d = impression.feature_dim();
    let l = chol_psd(&impression.sigma, cov_reg_eps)?;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let z: Vec<f64> = (0..d).map(|_| rng.standard_normal()).collect();
        let mut f = impression.mu.clone();
        for i in 0..d {
            let mut acc = 0.0;
            for j in 0..=i {
                acc += l.get(i, j) * z[j];
            }
            f[i] += acc;
        }
        out.push((f, impression.user_id));
    }
    Ok(out)
}

/// Step-3 (server side): build the K·M-row synthetic feature set, shuffle
/// it, and fine-tune the classifier for the configured epochs.
///
/// Impressions must cover user ids 0..K−1 exactly once, where K is the
/// classifier's head width.
pub fn train_server_classifier(
    classifier: &mut Network,
    impressions: &[UserImpression],
    cfg: &FaaConfig,
    rng: &mut SeededRng,
) -> Result<()> {
    cfg.validate()?;
    let k = classifier.output_dim();
    let mut seen = vec![false; k];
    for imp in impressions {
        if imp.user_id >= k {
            return Err(Error::Input(format!(
                "impression for user {} outside the {k}-way head",
                imp.user_id
            )));
        }
        if seen[imp.user_id] {
            return Err(Error::Input(format!(
                "duplicate impression for user {}",
                imp.user_id
            )));
        }
        seen[imp.user_id] = true;
    }
    if seen.iter().any(|&s| !s) {
        let missing: Vec<usize> = seen
            .iter()
            .enumerate()
            .filter(|(_, &s)| !s)
            .map(|(i, _)| i)
            .collect();
        return Err(Error::Input(format!(
            "missing impressions for users {missing:?}"
        )));
    }

    // Sample the full K·M dataset once, in ascending user order, before the
    // epoch loop.
    let mut by_user: Vec<&UserImpression> = impressions.iter().collect();
    by_user.sort_by_key(|imp| imp.user_id);
    let d = classifier.input_dim();
    let mut x = Matrix::zeros(k * cfg.samples_per_user, d);
    let mut labels = Vec::with_capacity(k * cfg.samples_per_user);
    let mut row = 0usize;
    for imp in by_user {
        let samples = sample_user_features(imp, cfg.samples_per_user, cfg.cov_reg_eps, rng)?;
        for (f, y) in samples {
            if f.len() != d {
                return Err(Error::Shape(format!(
                    "impression width {} vs classifier input {d}",
                    f.len()
                )));
            }
            x.data[row * d..(row + 1) * d].copy_from_slice(&f);
            labels.push(y);
            row += 1;
        }
    }
    debug_assert_eq!(row, k * cfg.samples_per_user);

    if cfg.epochs == 0 {
        return Ok(());
    }
    fit_classifier(classifier, &x, &labels, &cfg.train_config(), rng)?;
    Ok(())
}

/// Replace the classifier's output layer with a freshly initialized K-way
/// head (base classes and enrolled users never coincide).
pub fn redimension_head(classifier: &mut Network, k: usize, rng: &mut SeededRng) {
    let in_dim = classifier
        .layers
        .last()
        .expect("non-empty classifier")
        .input_dim();
    *classifier.layers.last_mut().unwrap() =
        DenseLayer::init_uniform(k, in_dim, Activation::Identity, rng);
}

/// Full training pipeline. Devices must each hold exactly one user's data
/// and together cover users 0..K−1 (the qIID = 0 regime).
///
/// Returns the authentication model and the transcript of every message
/// that crossed the device↔server boundary.
pub fn faa_train(
    mut net: Network,
    base_data: &LabeledDataset,
    base_hyperparams: &TrainConfig,
    devices: &[DeviceState],
    cfg: &FaaConfig,
    cut: usize,
    master_seed: u64,
) -> Result<(AuthModel, Transcript)> {
    cfg.validate()?;
    if devices.is_empty() {
        return Err(Error::Config("no devices".into()));
    }
    let k = devices.len();
    let mut transcript = Transcript::new(MethodTag::Faa);

    // Step-1: base training at the server, then split.
    let mut base_rng = SeededRng::substream(master_seed, "base-train");
    train_base(&mut net, base_data, base_hyperparams, &mut base_rng)?;
    let (extractor, mut classifier) = split_model(&net, cut)?;
    let mut head_rng = SeededRng::substream(master_seed, "faa/head-init");
    redimension_head(&mut classifier, k, &mut head_rng);

    // Step-2: broadcast F; each device replies with its impression.
    let feature_dim = extractor.output_dim();
    let f_units = extractor.param_count();
    let mut impressions = Vec::with_capacity(k);
    for device in devices {
        transcript.record(
            Direction::ServerToDevice,
            device.device_id,
            0,
            PayloadKind::ModelParams,
            f_units,
        )?;
        let mut imp = estimate_impression(&extractor, &device.local_data)?;
        if cfg.diag_only {
            imp = imp.diagonal_only();
        }
        transcript.record(
            Direction::DeviceToServer,
            device.device_id,
            0,
            PayloadKind::ImpressionPayload,
            impression_size_units(feature_dim, cfg.diag_only),
        )?;
        impressions.push(imp);
    }
    let mut ids: Vec<usize> = impressions.iter().map(|i| i.user_id).collect();
    ids.sort_unstable();
    if ids != (0..k).collect::<Vec<_>>() {
        return Err(Error::Input(format!(
            "devices must cover users 0..{k} exactly once, found {ids:?}"
        )));
    }

    // Step-3: resample, fine-tune C, broadcast it.
    let mut sample_rng = SeededRng::substream(master_seed, "faa/sampling");
    train_server_classifier(&mut classifier, &impressions, cfg, &mut sample_rng)?;
    let c_units = classifier.param_count();
    for device in devices {
        transcript.record(
            Direction::ServerToDevice,
            device.device_id,
            1,
            PayloadKind::ModelParams,
            c_units,
        )?;
    }

    let model = AuthModel {
        feature_extractor: extractor,
        classifier,
        num_users: k,
    };
    model.validate()?;
    Ok((model, transcript))
}
