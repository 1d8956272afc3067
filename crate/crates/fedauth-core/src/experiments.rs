//! Experiment configuration and drivers: single FAA runs, four-way method
//! comparison, the FedAvg-vs-qIID sweep, and the unknown-user ablation.
//!
//! A config plus one master seed fully determines every numeric output:
//! dataset draws, network initializations, device substreams, and sampling
//! all descend from the seed through named substreams.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::baselines::{
    fedavg_train, oneclass_fit, split_learning_train, FedAvgConfig, OneClassModel, SplitConfig,
};
use crate::datagen::{
    device_datasets, gen_base_dataset, gen_population, partition_by_qiid, LabeledDataset,
    PopulationSpec,
};
use crate::error::{Error, Result};
use crate::eval::{evaluate_method, AdaReport, MonolithicScorer, OneClassScorer};
use crate::faa::{faa_train, AuthModel, FaaConfig};
use crate::nn::{split_model, Network, TrainConfig};
use crate::protocol::{DeviceState, MethodTag, Transcript};
use crate::rng::{substream_seed, SeededRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    SingleRun,
    CompareMethods,
    QiidSweep,
    UnknownAblation,
}

/// Network architecture shared by every method: input and head widths come
/// from the data, so only the hidden trunk and the cut index are configured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub hidden_dims: Vec<usize>,
    /// Layer index separating the extractor (layers before the cut) from
    /// the classifier.
    pub cut: usize,
    /// Start split learning from the base-trained backbone with a fresh
    /// K-way head, mirroring a deployment that fine-tunes a shared
    /// pretrained feature network.
    #[serde(default = "default_true")]
    pub split_from_backbone: bool,
    /// Start FedAvg from the base-trained backbone instead of the
    /// protocol's usual random server initialization.
    #[serde(default)]
    pub fedavg_from_backbone: bool,
}

fn default_true() -> bool {
    true
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            hidden_dims: vec![32, 16],
            cut: 2,
            split_from_backbone: true,
            fedavg_from_backbone: false,
        }
    }
}

impl NetConfig {
    pub fn dims(&self, input_dim: usize, head: usize) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 2);
        dims.push(input_dim);
        dims.extend_from_slice(&self.hidden_dims);
        dims.push(head);
        dims
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_dims.is_empty() {
            return Err(Error::Config("net.hidden_dims must not be empty".into()));
        }
        if self.hidden_dims.contains(&0) {
            return Err(Error::Config("net.hidden_dims entries must be > 0".into()));
        }
        if self.cut == 0 || self.cut > self.hidden_dims.len() {
            return Err(Error::Config(format!(
                "net.cut must lie in 1..={}, got {}",
                self.hidden_dims.len(),
                self.cut
            )));
        }
        Ok(())
    }
}

/// Enrolled/unknown split and the per-user train/test fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub num_enrolled: usize,
    pub num_unknown: usize,
    /// Per-user fraction of samples used for training (50/50 by default).
    pub train_fraction: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            num_enrolled: 10,
            num_unknown: 10,
            train_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneClassSettings {
    pub reg_eps: f64,
}

impl Default for OneClassSettings {
    fn default() -> Self {
        Self { reg_eps: 1e-3 }
    }
}

/// Split-learning settings; the cut defaults to the shared net cut.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSettings {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    #[serde(default)]
    pub cut: Option<usize>,
}

impl Default for SplitSettings {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 16,
            learning_rate: 0.01,
            momentum: 0.9,
            cut: None,
        }
    }
}

impl SplitSettings {
    pub fn to_config(&self, default_cut: usize) -> SplitConfig {
        SplitConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            momentum: self.momentum,
            cut: self.cut.unwrap_or(default_cut),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QiidSweepSettings {
    pub targets: Vec<f64>,
    /// Device count; defaults to the enrolled-user count (N = K).
    #[serde(default)]
    pub devices: Option<usize>,
}

impl Default for QiidSweepSettings {
    fn default() -> Self {
        Self {
            targets: vec![1.0, 0.75, 0.5, 0.25, 0.0],
            devices: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationSettings {
    pub counts: Vec<usize>,
}

impl Default for AblationSettings {
    fn default() -> Self {
        Self {
            counts: vec![4, 6, 8, 10],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub output_dir: String,
    pub population: PopulationSpec,
    pub base_population: PopulationSpec,
    pub net: NetConfig,
    pub base_train: TrainConfig,
    pub faa: FaaConfig,
    pub fedavg: FedAvgConfig,
    pub split: SplitSettings,
    pub oneclass: OneClassSettings,
    pub eval: EvalConfig,
    pub qiid_sweep: QiidSweepSettings,
    pub unknown_ablation: AblationSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentKind::SingleRun,
            seed: 0,
            output_dir: "out".into(),
            population: PopulationSpec {
                num_users: 20,
                input_dim: 16,
                samples_per_user: 100,
                separation: 5.0,
                within_scale: 1.0,
                seed: 0,
            },
            base_population: PopulationSpec {
                num_users: 20,
                input_dim: 16,
                samples_per_user: 100,
                separation: 5.0,
                within_scale: 1.0,
                seed: 0,
            },
            net: NetConfig::default(),
            base_train: TrainConfig {
                epochs: 40,
                batch_size: 64,
                learning_rate: 0.01,
                momentum: 0.9,
            },
            faa: FaaConfig {
                samples_per_user: 200,
                epochs: 60,
                batch_size: 64,
                learning_rate: 0.01,
                momentum: 0.9,
                cov_reg_eps: 1e-6,
                diag_only: false,
            },
            fedavg: FedAvgConfig {
                rounds: 20,
                local_epochs: 2,
                batch_size: 16,
                learning_rate: 0.01,
                momentum: 0.9,
                participation: 1.0,
            },
            split: SplitSettings::default(),
            oneclass: OneClassSettings::default(),
            eval: EvalConfig::default(),
            qiid_sweep: QiidSweepSettings::default(),
            unknown_ablation: AblationSettings::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Every config violation, each tagged with its dotted field path.
    pub fn diagnostics(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut push_err = |prefix: &str, res: Result<()>| {
            if let Err(e) = res {
                out.push(format!("{prefix}: {e}"));
            }
        };
        push_err("population", self.population.validate());
        push_err("base_population", self.base_population.validate());
        push_err("net", self.net.validate());
        push_err("base_train", self.base_train.validate());
        push_err("faa", self.faa.validate());
        push_err("fedavg", self.fedavg.validate());
        push_err(
            "split",
            self.split.to_config(self.net.cut.max(1)).validate(),
        );

        if self.oneclass.reg_eps <= 0.0 {
            out.push("oneclass.reg_eps must be > 0".into());
        }
        if !(0.0 < self.eval.train_fraction && self.eval.train_fraction < 1.0) {
            out.push("eval.train_fraction must lie in (0, 1)".into());
        }
        if self.eval.num_enrolled < 2 {
            out.push("eval.num_enrolled must be >= 2".into());
        }
        if self.eval.num_unknown == 0 {
            out.push("eval.num_unknown must be >= 1".into());
        }
        if self.eval.num_enrolled + self.eval.num_unknown > self.population.num_users {
            out.push(format!(
                "eval: num_enrolled + num_unknown = {} exceeds population.num_users = {}",
                self.eval.num_enrolled + self.eval.num_unknown,
                self.population.num_users
            ));
        }
        if self
            .qiid_sweep
            .targets
            .iter()
            .any(|t| !(0.0..=1.0).contains(t))
        {
            out.push("qiid_sweep.targets must lie in [0, 1]".into());
        }
        if self.experiment == ExperimentKind::UnknownAblation {
            if self.unknown_ablation.counts.is_empty() {
                out.push("unknown_ablation.counts must not be empty".into());
            }
            for &c in &self.unknown_ablation.counts {
                if c == 0 {
                    out.push("unknown_ablation.counts entries must be >= 1".into());
                } else if c > self.eval.num_unknown {
                    out.push(format!(
                        "unknown_ablation.counts entry {c} exceeds eval.num_unknown = {}",
                        self.eval.num_unknown
                    ));
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let diags = self.diagnostics();
        if diags.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(diags.join("; ")))
        }
    }
}

/// Known config keys per JSON path; anything else is warned about, not
/// rejected (forward compatibility).
pub fn unknown_keys(value: &Value) -> Vec<String> {
    const POPULATION: &[&str] = &[
        "num_users",
        "input_dim",
        "samples_per_user",
        "separation",
        "within_scale",
        "seed",
    ];
    const TRAIN: &[&str] = &["epochs", "batch_size", "learning_rate", "momentum"];
    let sections: &[(&str, &[&str])] = &[
        ("population", POPULATION),
        ("base_population", POPULATION),
        (
            "net",
            &[
                "hidden_dims",
                "cut",
                "split_from_backbone",
                "fedavg_from_backbone",
            ],
        ),
        ("base_train", TRAIN),
        (
            "faa",
            &[
                "samples_per_user",
                "epochs",
                "batch_size",
                "learning_rate",
                "momentum",
                "cov_reg_eps",
                "diag_only",
            ],
        ),
        (
            "fedavg",
            &[
                "rounds",
                "local_epochs",
                "batch_size",
                "learning_rate",
                "momentum",
                "participation",
            ],
        ),
        (
            "split",
            &["epochs", "batch_size", "learning_rate", "momentum", "cut"],
        ),
        ("oneclass", &["reg_eps"]),
        ("eval", &["num_enrolled", "num_unknown", "train_fraction"]),
        ("qiid_sweep", &["targets", "devices"]),
        ("unknown_ablation", &["counts"]),
    ];
    let top: Vec<&str> = std::iter::once("experiment")
        .chain(["seed", "output_dir"])
        .chain(sections.iter().map(|(name, _)| *name))
        .collect();

    let mut out = Vec::new();
    let Some(obj) = value.as_object() else {
        return out;
    };
    for (key, sub) in obj {
        if !top.contains(&key.as_str()) {
            out.push(key.clone());
            continue;
        }
        if let Some((_, known)) = sections.iter().find(|(name, _)| name == key) {
            if let Some(sub_obj) = sub.as_object() {
                for sub_key in sub_obj.keys() {
                    if !known.contains(&sub_key.as_str()) {
                        out.push(format!("{key}.{sub_key}"));
                    }
                }
            }
        }
    }
    out
}

/// Apply a dotted-path override like `faa.samples_per_user=500` onto the raw
/// config document. The value is parsed as JSON when possible, else kept as
/// a string.
pub fn apply_override(doc: &mut Value, path: &str, raw_value: &str) -> Result<()> {
    if path.is_empty() {
        return Err(Error::Config("empty override path".into()));
    }
    let parsed: Value =
        serde_json::from_str(raw_value).unwrap_or_else(|_| Value::String(raw_value.to_string()));
    let mut cursor = doc;
    let segments: Vec<&str> = path.split('.').collect();
    for segment in &segments[..segments.len() - 1] {
        if !cursor.is_object() {
            return Err(Error::Config(format!(
                "override path {path} crosses a non-object value"
            )));
        }
        cursor = cursor
            .as_object_mut()
            .unwrap()
            .entry(segment.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    let last = segments[segments.len() - 1];
    let obj = cursor
        .as_object_mut()
        .ok_or_else(|| Error::Config(format!("override path {path} crosses a non-object value")))?;
    obj.insert(last.to_string(), parsed);
    Ok(())
}

/// Data shared by all experiment drivers: train split restricted to the
/// enrolled users, the full test split, id sets, and the base dataset.
#[derive(Debug, Clone)]
pub struct ExperimentData {
    pub train_enrolled: LabeledDataset,
    pub test: LabeledDataset,
    pub enrolled_ids: Vec<usize>,
    pub unknown_ids: Vec<usize>,
    pub base: LabeledDataset,
}

/// Generate populations and carve the per-user train/test split.
pub fn prepare_data(cfg: &ExperimentConfig) -> Result<ExperimentData> {
    cfg.validate()?;
    let population_spec = PopulationSpec {
        seed: substream_seed(cfg.seed, "datagen/enrolled"),
        ..cfg.population.clone()
    };
    let base_spec = PopulationSpec {
        seed: substream_seed(cfg.seed, "datagen/base"),
        ..cfg.base_population.clone()
    };
    let population = gen_population(&population_spec)?;
    let base = gen_base_dataset(&base_spec)?;

    let (train_all, test) = population.data.split_train_test(cfg.eval.train_fraction)?;
    let k_enrolled = cfg.eval.num_enrolled;
    let idx: Vec<usize> = train_all
        .samples
        .iter()
        .enumerate()
        .filter(|(_, s)| s.label < k_enrolled)
        .map(|(i, _)| i)
        .collect();
    let mut train_enrolled = train_all.subset(&idx);
    train_enrolled.num_classes = k_enrolled;

    Ok(ExperimentData {
        train_enrolled,
        test,
        enrolled_ids: (0..k_enrolled).collect(),
        unknown_ids: (k_enrolled..k_enrolled + cfg.eval.num_unknown).collect(),
        base: base.data,
    })
}

/// One device per enrolled user holding that user's whole train shard
/// (the qIID = 0 regime).
pub fn one_user_per_device(train: &LabeledDataset, device_master: u64) -> Result<Vec<DeviceState>> {
    (0..train.num_classes)
        .map(|user| {
            let idx: Vec<usize> = train
                .samples
                .iter()
                .enumerate()
                .filter(|(_, s)| s.label == user)
                .map(|(i, _)| i)
                .collect();
            if idx.is_empty() {
                return Err(Error::Input(format!("user {user} has no training samples")));
            }
            Ok(DeviceState::new(
                user as u64,
                train.subset(&idx),
                device_master,
            ))
        })
        .collect()
}

/// Which method a scenario runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodSelection {
    Faa,
    Fedavg,
    SplitLearning,
}

/// What a scenario hands back besides the transcript.
#[derive(Debug, Clone)]
pub enum TrainedArtifact {
    Auth(AuthModel),
    Global(Network),
}

/// Train the full base network exactly as the impression pipeline's Step-1
/// does (same substreams), so every method can share one backbone.
pub fn base_trained_network(cfg: &ExperimentConfig, data: &ExperimentData) -> Result<Network> {
    let mut init = SeededRng::substream(cfg.seed, "init/base-net");
    let mut net = Network::dense(
        &cfg.net
            .dims(cfg.population.input_dim, data.base.num_classes),
        &mut init,
    )?;
    let mut rng = SeededRng::substream(cfg.seed, "base-train");
    crate::faa::train_base(&mut net, &data.base, &cfg.base_train, &mut rng)?;
    Ok(net)
}

/// Uniform driver over the three federated methods: builds the method's
/// device fleet and network from its own substreams and runs it end to end.
///
/// Baselines start either from the base-trained network with a freshly
/// initialized K-way head or from a random network, per the `net` flags.
/// Pass a precomputed `backbone` to avoid repeating base training.
pub fn run_scenario_with_backbone(
    cfg: &ExperimentConfig,
    data: &ExperimentData,
    method: MethodSelection,
    backbone: Option<&Network>,
) -> Result<(TrainedArtifact, Transcript)> {
    let d_in = cfg.population.input_dim;
    let k = cfg.eval.num_enrolled;
    let baseline_net = |head_label: &str, from_backbone: bool| -> Result<Network> {
        if from_backbone {
            let mut net = match backbone {
                Some(b) => b.clone(),
                None => base_trained_network(cfg, data)?,
            };
            let mut head_rng = SeededRng::substream(cfg.seed, head_label);
            crate::faa::redimension_head(&mut net, k, &mut head_rng);
            Ok(net)
        } else {
            let mut init = SeededRng::substream(cfg.seed, head_label);
            Network::dense(&cfg.net.dims(d_in, k), &mut init)
        }
    };
    match method {
        MethodSelection::Faa => {
            let (net, base_hyperparams) = match backbone {
                // Already trained with the same substreams; skip Step-1's
                // training pass inside faa_train.
                Some(b) => (
                    b.clone(),
                    TrainConfig {
                        epochs: 0,
                        ..cfg.base_train.clone()
                    },
                ),
                None => {
                    let mut init = SeededRng::substream(cfg.seed, "init/base-net");
                    (
                        Network::dense(&cfg.net.dims(d_in, data.base.num_classes), &mut init)?,
                        cfg.base_train.clone(),
                    )
                }
            };
            let devices = one_user_per_device(
                &data.train_enrolled,
                substream_seed(cfg.seed, "devices/faa"),
            )?;
            let (model, transcript) = faa_train(
                net,
                &data.base,
                &base_hyperparams,
                &devices,
                &cfg.faa,
                cfg.net.cut,
                cfg.seed,
            )?;
            Ok((TrainedArtifact::Auth(model), transcript))
        }
        MethodSelection::Fedavg => {
            let template = baseline_net("init/fedavg-head", cfg.net.fedavg_from_backbone)?;
            let devices = one_user_per_device(
                &data.train_enrolled,
                substream_seed(cfg.seed, "devices/fedavg"),
            )?;
            let (global, transcript) = fedavg_train(
                &devices,
                &template,
                &cfg.fedavg,
                substream_seed(cfg.seed, "fedavg"),
            )?;
            Ok((TrainedArtifact::Global(global), transcript))
        }
        MethodSelection::SplitLearning => {
            let whole = baseline_net("init/split-head", cfg.net.split_from_backbone)?;
            let split_cfg = cfg.split.to_config(cfg.net.cut);
            let (f_template, c_server) = split_model(&whole, split_cfg.cut)?;
            let devices = one_user_per_device(
                &data.train_enrolled,
                substream_seed(cfg.seed, "devices/split"),
            )?;
            let (model, transcript) =
                split_learning_train(&devices, &f_template, &c_server, &split_cfg)?;
            Ok((TrainedArtifact::Auth(model), transcript))
        }
    }
}

pub fn run_scenario(
    cfg: &ExperimentConfig,
    data: &ExperimentData,
    method: MethodSelection,
) -> Result<(TrainedArtifact, Transcript)> {
    run_scenario_with_backbone(cfg, data, method, None)
}

/// Communication totals of one transcript, for reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommSummary {
    pub method_tag: MethodTag,
    pub uplink_units: usize,
    pub uplink_messages: usize,
    pub downlink_units: usize,
    pub message_count: usize,
    pub rounds: usize,
}

impl From<&Transcript> for CommSummary {
    fn from(t: &Transcript) -> Self {
        Self {
            method_tag: t.method_tag,
            uplink_units: t.uplink_cost(),
            uplink_messages: t.uplink_messages(),
            downlink_units: t.downlink_cost(),
            message_count: t.messages().len(),
            rounds: t.round_count(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodOutcome {
    pub report: AdaReport,
    pub communication: CommSummary,
}

/// Result of a single FAA run.
#[derive(Debug, Clone)]
pub struct SingleRunResult {
    pub report: AdaReport,
    pub model: AuthModel,
    pub transcript: Transcript,
}

impl SingleRunResult {
    pub fn report_json(&self) -> Result<String> {
        let doc = serde_json::json!({
            "experiment": "single_run",
            "faa": {
                "report": self.report,
                "communication": CommSummary::from(&self.transcript),
            },
        });
        Ok(serde_json::to_string_pretty(&doc)?)
    }
}

/// Train FAA once and evaluate it.
pub fn single_run(cfg: &ExperimentConfig) -> Result<SingleRunResult> {
    let data = prepare_data(cfg)?;
    let (artifact, transcript) = run_scenario(cfg, &data, MethodSelection::Faa)?;
    let TrainedArtifact::Auth(model) = artifact else {
        unreachable!("faa scenario yields an auth model");
    };
    let report = evaluate_method(&model, &data.test, &data.enrolled_ids, &data.unknown_ids)?;
    Ok(SingleRunResult {
        report,
        model,
        transcript,
    })
}

/// Result of the four-way comparison at qIID = 0.
#[derive(Debug, Clone)]
pub struct CompareMethodsResult {
    pub faa: AdaReport,
    pub fedavg: AdaReport,
    pub split_learning: AdaReport,
    pub oneclass: AdaReport,
    pub faa_model: AuthModel,
    pub faa_transcript: Transcript,
    pub fedavg_transcript: Transcript,
    pub split_transcript: Transcript,
}

impl CompareMethodsResult {
    pub fn report_json(&self) -> Result<String> {
        let doc = serde_json::json!({
            "experiment": "compare_methods",
            "faa": {
                "report": self.faa,
                "communication": CommSummary::from(&self.faa_transcript),
            },
            "fedavg": {
                "report": self.fedavg,
                "communication": CommSummary::from(&self.fedavg_transcript),
            },
            "split_learning": {
                "report": self.split_learning,
                "communication": CommSummary::from(&self.split_transcript),
            },
            "oneclass": {
                "report": self.oneclass,
            },
        });
        Ok(serde_json::to_string_pretty(&doc)?)
    }
}

/// Run FAA, FedAvg, split learning, and the one-class baseline on the same
/// population in the one-user-per-device regime, and evaluate all four with
/// the same protocol. The one-class models reuse FAA's base-trained
/// extractor and train purely on-device (no transcript).
pub fn compare_methods(cfg: &ExperimentConfig) -> Result<CompareMethodsResult> {
    let data = prepare_data(cfg)?;
    let backbone = base_trained_network(cfg, &data)?;

    let (faa_artifact, faa_transcript) =
        run_scenario_with_backbone(cfg, &data, MethodSelection::Faa, Some(&backbone))?;
    let TrainedArtifact::Auth(faa_model) = faa_artifact else {
        unreachable!("faa scenario yields an auth model");
    };
    let faa_report = evaluate_method(
        &faa_model,
        &data.test,
        &data.enrolled_ids,
        &data.unknown_ids,
    )?;

    let oneclass_models: Vec<OneClassModel> = one_user_per_device(
        &data.train_enrolled,
        substream_seed(cfg.seed, "devices/oneclass"),
    )?
    .iter()
    .map(|device| {
        oneclass_fit(
            &faa_model.feature_extractor,
            &device.local_data,
            cfg.oneclass.reg_eps,
        )
    })
    .collect::<Result<_>>()?;
    let oneclass_scorer = OneClassScorer {
        models: &oneclass_models,
        extractor: &faa_model.feature_extractor,
    };
    let oneclass_report = evaluate_method(
        &oneclass_scorer,
        &data.test,
        &data.enrolled_ids,
        &data.unknown_ids,
    )?;

    let (fedavg_artifact, fedavg_transcript) =
        run_scenario_with_backbone(cfg, &data, MethodSelection::Fedavg, Some(&backbone))?;
    let TrainedArtifact::Global(global) = fedavg_artifact else {
        unreachable!("fedavg scenario yields a global network");
    };
    let fedavg_report = evaluate_method(
        &MonolithicScorer(&global),
        &data.test,
        &data.enrolled_ids,
        &data.unknown_ids,
    )?;

    let (split_artifact, split_transcript) =
        run_scenario_with_backbone(cfg, &data, MethodSelection::SplitLearning, Some(&backbone))?;
    let TrainedArtifact::Auth(split_model_out) = split_artifact else {
        unreachable!("split scenario yields an auth model");
    };
    let split_report = evaluate_method(
        &split_model_out,
        &data.test,
        &data.enrolled_ids,
        &data.unknown_ids,
    )?;

    Ok(CompareMethodsResult {
        faa: faa_report,
        fedavg: fedavg_report,
        split_learning: split_report,
        oneclass: oneclass_report,
        faa_model,
        faa_transcript,
        fedavg_transcript,
        split_transcript,
    })
}

/// One point of the FedAvg-vs-qIID curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QiidPoint {
    pub target_qiid: f64,
    pub measured_qiid: f64,
    pub mean_ada: f64,
    pub std_ada: f64,
}

#[derive(Debug, Clone)]
pub struct QiidSweepResult {
    pub points: Vec<QiidPoint>,
}

impl QiidSweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("target_qiid,measured_qiid,mean_ada,std_ada\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{}\n",
                p.target_qiid, p.measured_qiid, p.mean_ada, p.std_ada
            ));
        }
        out
    }

    pub fn report_json(&self) -> Result<String> {
        let doc = serde_json::json!({
            "experiment": "qiid_sweep",
            "points": self.points,
        });
        Ok(serde_json::to_string_pretty(&doc)?)
    }
}

/// Train FedAvg at each requested qIID target and evaluate it. Every sweep
/// point re-partitions the enrolled training data but starts from the same
/// initial network.
pub fn qiid_sweep(cfg: &ExperimentConfig) -> Result<QiidSweepResult> {
    let data = prepare_data(cfg)?;
    let devices_n = cfg.qiid_sweep.devices.unwrap_or(cfg.eval.num_enrolled);
    let template = if cfg.net.fedavg_from_backbone {
        let mut net = base_trained_network(cfg, &data)?;
        let mut head_rng = SeededRng::substream(cfg.seed, "init/fedavg-head");
        crate::faa::redimension_head(&mut net, cfg.eval.num_enrolled, &mut head_rng);
        net
    } else {
        let mut init = SeededRng::substream(cfg.seed, "init/fedavg-head");
        Network::dense(
            &cfg.net
                .dims(cfg.population.input_dim, cfg.eval.num_enrolled),
            &mut init,
        )?
    };

    let mut points = Vec::with_capacity(cfg.qiid_sweep.targets.len());
    for (idx, &target) in cfg.qiid_sweep.targets.iter().enumerate() {
        let partition = partition_by_qiid(&data.train_enrolled, devices_n, target)?;
        let shards = device_datasets(&data.train_enrolled, &partition);
        let device_master = substream_seed(cfg.seed, &format!("devices/fedavg-sweep/{idx}"));
        let devices: Vec<DeviceState> = shards
            .into_iter()
            .enumerate()
            .map(|(i, shard)| DeviceState::new(i as u64, shard, device_master))
            .collect();
        let (global, _) = fedavg_train(
            &devices,
            &template,
            &cfg.fedavg,
            substream_seed(cfg.seed, &format!("fedavg-sweep/{idx}")),
        )?;
        let report = evaluate_method(
            &MonolithicScorer(&global),
            &data.test,
            &data.enrolled_ids,
            &data.unknown_ids,
        )?;
        points.push(QiidPoint {
            target_qiid: target,
            measured_qiid: partition.measured_qiid,
            mean_ada: report.mean_ada,
            std_ada: report.std_ada,
        });
    }
    Ok(QiidSweepResult { points })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub num_unknown: usize,
    pub mean_ada: f64,
    pub std_ada: f64,
}

#[derive(Debug, Clone)]
pub struct AblationResult {
    pub rows: Vec<AblationRow>,
}

impl AblationResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("num_unknown,mean_ada,std_ada\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{}\n", r.num_unknown, r.mean_ada, r.std_ada));
        }
        out
    }

    pub fn report_json(&self) -> Result<String> {
        let doc = serde_json::json!({
            "experiment": "unknown_ablation",
            "rows": self.rows,
        });
        Ok(serde_json::to_string_pretty(&doc)?)
    }
}

/// Train FAA once, then evaluate against growing prefixes of the unknown
/// users.
pub fn unknown_ablation(cfg: &ExperimentConfig) -> Result<AblationResult> {
    let data = prepare_data(cfg)?;
    let (artifact, _) = run_scenario(cfg, &data, MethodSelection::Faa)?;
    let TrainedArtifact::Auth(model) = artifact else {
        unreachable!("faa scenario yields an auth model");
    };
    let mut rows = Vec::with_capacity(cfg.unknown_ablation.counts.len());
    for &count in &cfg.unknown_ablation.counts {
        if count == 0 {
            return Err(Error::Input("unknown-user count must be >= 1".into()));
        }
        if count > data.unknown_ids.len() {
            return Err(Error::Input(format!(
                "unknown-user count {count} exceeds available {}",
                data.unknown_ids.len()
            )));
        }
        let report = evaluate_method(
            &model,
            &data.test,
            &data.enrolled_ids,
            &data.unknown_ids[..count],
        )?;
        rows.push(AblationRow {
            num_unknown: count,
            mean_ada: report.mean_ada,
            std_ada: report.std_ada,
        });
    }
    Ok(AblationResult { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Small, fast config used across driver tests.
    fn tiny_config() -> ExperimentConfig {
        ExperimentConfig {
            experiment: ExperimentKind::CompareMethods,
            seed: 5,
            population: PopulationSpec {
                num_users: 4,
                input_dim: 4,
                samples_per_user: 40,
                separation: 8.0,
                within_scale: 0.8,
                seed: 0,
            },
            base_population: PopulationSpec {
                num_users: 6,
                input_dim: 4,
                samples_per_user: 30,
                separation: 8.0,
                within_scale: 0.8,
                seed: 0,
            },
            net: NetConfig {
                hidden_dims: vec![8, 6],
                cut: 2,
                ..NetConfig::default()
            },
            base_train: TrainConfig {
                epochs: 10,
                batch_size: 32,
                learning_rate: 0.02,
                momentum: 0.9,
            },
            faa: FaaConfig {
                samples_per_user: 40,
                epochs: 15,
                batch_size: 20,
                learning_rate: 0.02,
                momentum: 0.9,
                cov_reg_eps: 1e-6,
                diag_only: false,
            },
            fedavg: FedAvgConfig {
                rounds: 5,
                local_epochs: 1,
                batch_size: 10,
                learning_rate: 0.02,
                momentum: 0.9,
                participation: 1.0,
            },
            split: SplitSettings {
                epochs: 4,
                batch_size: 10,
                learning_rate: 0.02,
                momentum: 0.9,
                cut: None,
            },
            oneclass: OneClassSettings { reg_eps: 1e-3 },
            eval: EvalConfig {
                num_enrolled: 2,
                num_unknown: 2,
                train_fraction: 0.5,
            },
            qiid_sweep: QiidSweepSettings {
                targets: vec![1.0, 0.0],
                devices: None,
            },
            unknown_ablation: AblationSettings { counts: vec![1, 2] },
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn default_config_is_valid() {
        assert!(ExperimentConfig::default().diagnostics().is_empty());
    }

    #[test]
    fn diagnostics_name_offending_fields() {
        let mut cfg = tiny_config();
        cfg.faa.samples_per_user = 0;
        cfg.eval.train_fraction = 1.5;
        let diags = cfg.diagnostics();
        assert!(diags.iter().any(|d| d.contains("faa.samples_per_user")));
        assert!(diags.iter().any(|d| d.contains("eval.train_fraction")));
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = tiny_config();
        let text = serde_json::to_string(&cfg).unwrap();
        let back = ExperimentConfig::from_json(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn serialized_config_keys_are_all_known() {
        let value = serde_json::to_value(ExperimentConfig::default()).unwrap();
        assert!(unknown_keys(&value).is_empty());
    }

    #[test]
    fn unknown_keys_are_reported_with_paths() {
        let doc: Value = serde_json::json!({
            "experiment": "single_run",
            "faa": { "samples_per_user": 10, "bogus": 1 },
            "mystery": true,
        });
        let keys = unknown_keys(&doc);
        assert!(keys.contains(&"faa.bogus".to_string()));
        assert!(keys.contains(&"mystery".to_string()));
    }

    #[test]
    fn overrides_rewrite_dotted_paths() {
        let mut doc = serde_json::to_value(tiny_config()).unwrap();
        apply_override(&mut doc, "faa.samples_per_user", "123").unwrap();
        apply_override(&mut doc, "seed", "42").unwrap();
        apply_override(&mut doc, "output_dir", "elsewhere").unwrap();
        let cfg: ExperimentConfig = serde_json::from_value(doc).unwrap();
        assert_eq!(cfg.faa.samples_per_user, 123);
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.output_dir, "elsewhere");
    }

    #[test]
    fn split_settings_default_to_the_shared_cut() {
        let mut settings = SplitSettings::default();
        assert_eq!(settings.to_config(3).cut, 3);
        settings.cut = Some(1);
        assert_eq!(settings.to_config(3).cut, 1);
    }

    #[test]
    fn prepare_data_splits_and_restricts() {
        let cfg = tiny_config();
        let data = prepare_data(&cfg).unwrap();
        assert_eq!(data.enrolled_ids, vec![0, 1]);
        assert_eq!(data.unknown_ids, vec![2, 3]);
        assert_eq!(data.train_enrolled.num_classes, 2);
        assert!(data.train_enrolled.samples.iter().all(|s| s.label < 2));
        // 4 users × 40 samples, half to test.
        assert_eq!(data.test.len(), 80);
        assert_eq!(data.train_enrolled.len(), 40);
    }

    #[test]
    fn compare_methods_produces_all_entries_and_is_deterministic() {
        let cfg = tiny_config();
        let a = compare_methods(&cfg).unwrap();
        let b = compare_methods(&cfg).unwrap();
        assert_eq!(a.faa, b.faa);
        assert_eq!(a.fedavg, b.fedavg);
        assert_eq!(a.split_learning, b.split_learning);
        assert_eq!(a.oneclass, b.oneclass);
        assert_eq!(a.faa_transcript, b.faa_transcript);

        let json = a.report_json().unwrap();
        let v: Value = serde_json::from_str(&json).unwrap();
        for method in ["faa", "fedavg", "split_learning", "oneclass"] {
            assert!(v.get(method).is_some(), "missing {method}");
        }
        assert_eq!(v["faa"]["communication"]["uplink_messages"], 2);
    }

    #[test]
    fn qiid_sweep_emits_one_point_per_target() {
        let cfg = tiny_config();
        let sweep = qiid_sweep(&cfg).unwrap();
        assert_eq!(sweep.points.len(), 2);
        assert_eq!(sweep.points[0].target_qiid, 1.0);
        assert_eq!(sweep.points[1].target_qiid, 0.0);
        assert_eq!(sweep.points[1].measured_qiid, 0.0);
        let csv = sweep.to_csv();
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn unknown_ablation_emits_requested_rows() {
        let cfg = tiny_config();
        let result = unknown_ablation(&cfg).unwrap();
        assert_eq!(result.rows.len(), 2);
        assert_eq!(result.rows[0].num_unknown, 1);
        assert_eq!(result.rows[1].num_unknown, 2);
    }

    #[test]
    fn unknown_ablation_rejects_bad_counts() {
        let mut cfg = tiny_config();
        cfg.unknown_ablation.counts = vec![0];
        assert!(unknown_ablation(&cfg).is_err());
        cfg.unknown_ablation.counts = vec![5];
        assert!(unknown_ablation(&cfg).is_err());
    }
}
