//! Synthetic user populations, qIID-controlled device partitioning, and
//! feature-file ingestion.
//!
//! Populations stand in for per-user face features: every user gets a
//! centroid drawn uniformly on a sphere and samples from a non-isotropic
//! Gaussian around it. Partitions distribute labeled samples across N
//! devices at a requested qIID level.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::rng::SeededRng;

/// A user counts toward a device's Kᵢ only when the device holds at least
/// this many of the user's samples.
pub const SUFFICIENT_SAMPLES: usize = 5;

/// Seed salt separating base-dataset draws from enrolled-population draws.
const BASE_SEED_SALT: u64 = 0xba5e_da7a_5a17_ed01;

/// One labeled sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: Vec<f64>,
    pub label: usize,
}

/// A labeled dataset with a fixed class count and input width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub samples: Vec<Sample>,
    pub num_classes: usize,
    pub input_dim: usize,
}

impl LabeledDataset {
    pub fn new(num_classes: usize, input_dim: usize) -> Self {
        Self {
            samples: Vec::new(),
            num_classes,
            input_dim,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.samples.iter().enumerate() {
            if s.label >= self.num_classes {
                return Err(Error::Input(format!(
                    "sample {i} has label {} outside {} classes",
                    s.label, self.num_classes
                )));
            }
            if s.x.len() != self.input_dim {
                return Err(Error::Input(format!(
                    "sample {i} has width {} instead of {}",
                    s.x.len(),
                    self.input_dim
                )));
            }
            if s.x.iter().any(|v| !v.is_finite()) {
                return Err(Error::Input(format!(
                    "sample {i} contains a non-finite value"
                )));
            }
        }
        Ok(())
    }

    /// Rows of all samples as a matrix, in dataset order.
    pub fn feature_matrix(&self) -> Matrix {
        let mut m = Matrix::zeros(self.samples.len(), self.input_dim);
        for (r, s) in self.samples.iter().enumerate() {
            m.data[r * self.input_dim..(r + 1) * self.input_dim].copy_from_slice(&s.x);
        }
        m
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label).collect()
    }

    /// Subset by sample indices, keeping class count and width.
    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            num_classes: self.num_classes,
            input_dim: self.input_dim,
        }
    }

    /// Per-user split into (train, test): the first
    /// floor(train_fraction·n) of each user's samples train, the rest test.
    pub fn split_train_test(
        &self,
        train_fraction: f64,
    ) -> Result<(LabeledDataset, LabeledDataset)> {
        if !(0.0 < train_fraction && train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train fraction must lie in (0, 1), got {train_fraction}"
            )));
        }
        let mut per_user: Vec<Vec<usize>> = vec![Vec::new(); self.num_classes];
        for (i, s) in self.samples.iter().enumerate() {
            per_user[s.label].push(i);
        }
        let mut train_idx = Vec::new();
        let mut test_idx = Vec::new();
        for indices in &per_user {
            let n_train = (indices.len() as f64 * train_fraction).floor() as usize;
            train_idx.extend_from_slice(&indices[..n_train]);
            test_idx.extend_from_slice(&indices[n_train..]);
        }
        Ok((self.subset(&train_idx), self.subset(&test_idx)))
    }
}

/// Specification of a synthetic population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    /// Number of users (classes).
    pub num_users: usize,
    pub input_dim: usize,
    pub samples_per_user: usize,
    /// Radius of the sphere the user centroids are drawn on.
    pub separation: f64,
    /// Scale of the per-user diagonal covariance.
    pub within_scale: f64,
    #[serde(default)]
    pub seed: u64,
}

impl PopulationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_users == 0 || self.input_dim == 0 || self.samples_per_user == 0 {
            return Err(Error::Config("population counts must be positive".into()));
        }
        if self.separation < 0.0 || self.within_scale < 0.0 {
            return Err(Error::Config(
                "separation and within_scale must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// A generated population: the labeled samples plus the ground-truth
/// centroids (kept for diagnostics and tests, never shown to methods).
#[derive(Debug, Clone)]
pub struct Population {
    pub data: LabeledDataset,
    pub centroids: Vec<Vec<f64>>,
}

fn unit_sphere_point(dim: usize, rng: &mut SeededRng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.standard_normal()).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.iter().map(|x| x / norm).collect();
        }
    }
}

/// Generate a population: per-user centroid uniform on the sphere of radius
/// `separation`, samples from a non-isotropic Gaussian (random diagonal
/// covariance scaled by `within_scale`). Pure function of the spec.
pub fn gen_population(spec: &PopulationSpec) -> Result<Population> {
    spec.validate()?;
    let mut data = LabeledDataset::new(spec.num_users, spec.input_dim);
    let mut centroids = Vec::with_capacity(spec.num_users);
    for user in 0..spec.num_users {
        let mut rng = SeededRng::substream(spec.seed, &format!("population/user/{user}"));
        let centroid: Vec<f64> = unit_sphere_point(spec.input_dim, &mut rng)
            .into_iter()
            .map(|v| v * spec.separation)
            .collect();
        // Log-uniform per-axis standard deviations around within_scale, so
        // users carry distinct covariance fingerprints, not just distinct
        // centroids.
        let axis_std: Vec<f64> = (0..spec.input_dim)
            .map(|_| spec.within_scale * rng.uniform_in(-1.2, 1.2).exp())
            .collect();
        for _ in 0..spec.samples_per_user {
            let x: Vec<f64> = centroid
                .iter()
                .zip(&axis_std)
                .map(|(&c, &s)| c + s * rng.standard_normal())
                .collect();
            data.samples.push(Sample { x, label: user });
        }
        centroids.push(centroid);
    }
    Ok(Population { data, centroids })
}

/// Generate the base dataset used for server-side pre-training.
///
/// Uses the same generator on a salted seed so base classes never coincide
/// with an enrolled population drawn from the same experiment seed.
pub fn gen_base_dataset(spec: &PopulationSpec) -> Result<Population> {
    let salted = PopulationSpec {
        seed: spec.seed ^ BASE_SEED_SALT,
        ..spec.clone()
    };
    gen_population(&salted)
}

/// Assignment of dataset sample indices to N devices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    /// Per-device lists of sample indices into the partitioned dataset.
    pub device_indices: Vec<Vec<usize>>,
    /// Kᵢ: users with at least [`SUFFICIENT_SAMPLES`] samples on device i.
    pub users_per_device: Vec<usize>,
    pub measured_qiid: f64,
}

/// qIID of a partition from its per-device user counts Kᵢ:
/// ((1/N)·Σ Kᵢ/K − 1/K) / (1 − 1/K), clamped to [0, 1].
pub fn compute_qiid(users_per_device: &[usize], num_users: usize) -> Result<f64> {
    if num_users < 2 {
        return Err(Error::Input(format!(
            "qIID needs at least 2 users, got {num_users}"
        )));
    }
    if users_per_device.is_empty() {
        return Err(Error::Input("qIID needs at least one device".into()));
    }
    let n = users_per_device.len() as f64;
    let k = num_users as f64;
    let mean_fraction = users_per_device
        .iter()
        .map(|&ki| ki as f64 / k)
        .sum::<f64>()
        / n;
    let q = (mean_fraction - 1.0 / k) / (1.0 - 1.0 / k);
    Ok(q.clamp(0.0, 1.0))
}

fn count_sufficient_users(device_indices: &[usize], data: &LabeledDataset) -> usize {
    let mut counts = vec![0usize; data.num_classes];
    for &i in device_indices {
        counts[data.samples[i].label] += 1;
    }
    counts.iter().filter(|&&c| c >= SUFFICIENT_SAMPLES).count()
}

/// Partition `data` across `num_devices` devices at the requested qIID.
///
/// Each device receives an (approximately) equal share of the samples.
/// Users-per-device Kᵢ = round(target·(K−1) + 1); users are dealt to devices
/// round-robin and each device's quota is split evenly across its users.
pub fn partition_by_qiid(
    data: &LabeledDataset,
    num_devices: usize,
    target_qiid: f64,
) -> Result<Partition> {
    if !(0.0..=1.0).contains(&target_qiid) {
        return Err(Error::Input(format!(
            "target qIID must lie in [0, 1], got {target_qiid}"
        )));
    }
    if num_devices == 0 || num_devices > data.len() {
        return Err(Error::Input(format!(
            "cannot spread {} samples over {num_devices} devices",
            data.len()
        )));
    }
    let k = data.num_classes;
    if k < 2 {
        return Err(Error::Input("partitioning needs at least 2 users".into()));
    }
    let users_per_device_target = ((target_qiid * (k - 1) as f64) + 1.0).round() as usize;

    // Per-user pools of sample indices, consumed front to back.
    let mut pools: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, s) in data.samples.iter().enumerate() {
        pools[s.label].push(i);
    }
    let mut cursors = vec![0usize; k];

    let total = data.len();
    let base_quota = total / num_devices;
    let extra = total % num_devices;

    let mut device_indices: Vec<Vec<usize>> = Vec::with_capacity(num_devices);
    let mut next_user = 0usize;
    for device in 0..num_devices {
        let quota = base_quota + usize::from(device < extra);
        let assigned: Vec<usize> = (0..users_per_device_target)
            .map(|j| (next_user + j) % k)
            .collect();
        next_user = (next_user + users_per_device_target) % k;

        let per_user = quota / users_per_device_target;
        let remainder = quota % users_per_device_target;
        let mut indices = Vec::with_capacity(quota);
        for (slot, &user) in assigned.iter().enumerate() {
            let want = per_user + usize::from(slot < remainder);
            let available = pools[user].len() - cursors[user];
            if available < want {
                return Err(Error::Partition(format!(
                    "device {device}: user {user} has {available} samples left, needs {want}"
                )));
            }
            indices.extend_from_slice(&pools[user][cursors[user]..cursors[user] + want]);
            cursors[user] += want;
        }
        device_indices.push(indices);
    }

    let users_per_device: Vec<usize> = device_indices
        .iter()
        .map(|d| count_sufficient_users(d, data))
        .collect();
    let measured_qiid = compute_qiid(&users_per_device, k)?;
    Ok(Partition {
        device_indices,
        users_per_device,
        measured_qiid,
    })
}

/// Materialize per-device datasets from a partition.
pub fn device_datasets(data: &LabeledDataset, partition: &Partition) -> Vec<LabeledDataset> {
    partition
        .device_indices
        .iter()
        .map(|idx| data.subset(idx))
        .collect()
}

/// Write a dataset to the feature-file format: a `d=<dim>,k=<classes>`
/// header, then one row per sample with the features followed by the label.
/// Floats use round-trip-exact formatting.
pub fn save_features(data: &LabeledDataset, path: &Path) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "d={},k={}", data.input_dim, data.num_classes);
    for s in &data.samples {
        for v in &s.x {
            let _ = write!(out, "{v},");
        }
        let _ = writeln!(out, "{}", s.label);
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Load a dataset from the feature-file format. Errors carry 1-based line
/// numbers.
pub fn load_features(path: &Path) -> Result<LabeledDataset> {
    let text = std::fs::read_to_string(path)?;
    parse_features(&text)
}

pub fn parse_features(text: &str) -> Result<LabeledDataset> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "empty file".into(),
    })?;
    let (input_dim, num_classes) = parse_header(header)?;
    let mut data = LabeledDataset::new(num_classes, input_dim);
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != input_dim + 1 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected {} fields, found {}", input_dim + 1, fields.len()),
            });
        }
        let mut x = Vec::with_capacity(input_dim);
        for f in &fields[..input_dim] {
            let v: f64 = f.trim().parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("non-numeric cell {f:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("non-finite value {f:?}"),
                });
            }
            x.push(v);
        }
        let label: usize = fields[input_dim].trim().parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("bad label {:?}", fields[input_dim]),
        })?;
        if label >= num_classes {
            return Err(Error::Parse {
                line: line_no,
                message: format!("label {label} outside k={num_classes}"),
            });
        }
        data.samples.push(Sample { x, label });
    }
    Ok(data)
}

fn parse_header(header: &str) -> Result<(usize, usize)> {
    let bad = |msg: &str| Error::Parse {
        line: 1,
        message: msg.to_string(),
    };
    let mut d = None;
    let mut k = None;
    for part in header.split(',') {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| bad(&format!("malformed header field {part:?}")))?;
        let value: usize = value
            .trim()
            .parse()
            .map_err(|_| bad(&format!("bad header value {value:?}")))?;
        match key.trim() {
            "d" => d = Some(value),
            "k" => k = Some(value),
            other => return Err(bad(&format!("unknown header key {other:?}"))),
        }
    }
    match (d, k) {
        (Some(d), Some(k)) if d > 0 && k > 0 => Ok((d, k)),
        _ => Err(bad("header must declare positive d and k")),
    }
}
