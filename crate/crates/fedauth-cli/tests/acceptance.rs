//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line. The heavyweight experiment runs are shared across
//! criteria through lazy one-time initialization.

use std::sync::OnceLock;

use fedauth_core::baselines::FedAvgConfig;
use fedauth_core::datagen::PopulationSpec;
use fedauth_core::eval::{ada_at_threshold, best_ada, ScoreSet};
use fedauth_core::experiments::{
    compare_methods, prepare_data, qiid_sweep, run_scenario, unknown_ablation, AblationResult,
    CompareMethodsResult, ExperimentConfig, ExperimentKind, MethodSelection, NetConfig,
    QiidSweepResult, TrainedArtifact,
};
use fedauth_core::faa::{
    chol_psd, faa_train, impression_from_features, sample_user_features, FaaConfig, UserImpression,
};
use fedauth_core::nn::{batch_softmax_xent, grad_check, split_model, Matrix, Network, TrainConfig};
use fedauth_core::protocol::{DeviceState, PayloadKind, Transcript};
use fedauth_core::rng::SeededRng;

/// The benchmark population and training schedule used for the trend
/// criteria: 10 enrolled users (= 10 devices), 10 unknown users, and a
/// disjoint 40-user base population, all synthetic.
fn acceptance_config() -> ExperimentConfig {
    ExperimentConfig {
        experiment: ExperimentKind::CompareMethods,
        seed: 42,
        output_dir: "unused".into(),
        population: PopulationSpec {
            num_users: 20,
            input_dim: 24,
            samples_per_user: 400,
            separation: 0.5,
            within_scale: 1.0,
            seed: 0,
        },
        base_population: PopulationSpec {
            num_users: 40,
            input_dim: 24,
            samples_per_user: 400,
            separation: 0.5,
            within_scale: 1.0,
            seed: 0,
        },
        net: NetConfig {
            hidden_dims: vec![192, 96],
            cut: 1,
            split_from_backbone: true,
            fedavg_from_backbone: false,
        },
        base_train: TrainConfig {
            epochs: 60,
            batch_size: 64,
            learning_rate: 0.01,
            momentum: 0.9,
        },
        faa: FaaConfig {
            samples_per_user: 500,
            epochs: 180,
            batch_size: 64,
            learning_rate: 0.01,
            momentum: 0.9,
            cov_reg_eps: 1e-6,
            diag_only: false,
        },
        fedavg: FedAvgConfig {
            rounds: 3,
            local_epochs: 10,
            batch_size: 16,
            learning_rate: 0.02,
            momentum: 0.9,
            participation: 1.0,
        },
        split: fedauth_core::experiments::SplitSettings {
            epochs: 40,
            batch_size: 16,
            learning_rate: 0.002,
            momentum: 0.9,
            cut: None,
        },
        oneclass: fedauth_core::experiments::OneClassSettings { reg_eps: 1e-3 },
        eval: fedauth_core::experiments::EvalConfig {
            num_enrolled: 10,
            num_unknown: 10,
            train_fraction: 0.5,
        },
        qiid_sweep: fedauth_core::experiments::QiidSweepSettings {
            targets: vec![1.0, 0.75, 0.5, 0.25, 0.0],
            devices: None,
        },
        unknown_ablation: fedauth_core::experiments::AblationSettings {
            counts: vec![4, 6, 8, 10],
        },
    }
}

fn sweep_result() -> &'static QiidSweepResult {
    static SWEEP: OnceLock<QiidSweepResult> = OnceLock::new();
    SWEEP.get_or_init(|| qiid_sweep(&acceptance_config()).expect("qiid sweep runs"))
}

fn compare_result() -> &'static CompareMethodsResult {
    static COMPARE: OnceLock<CompareMethodsResult> = OnceLock::new();
    COMPARE.get_or_init(|| compare_methods(&acceptance_config()).expect("comparison runs"))
}

fn ablation_result() -> &'static AblationResult {
    static ABLATION: OnceLock<AblationResult> = OnceLock::new();
    ABLATION.get_or_init(|| unknown_ablation(&acceptance_config()).expect("ablation runs"))
}

fn report_line(criterion: &str, pass: bool, detail: &str) {
    println!(
        "[{}] criterion {criterion}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} failed: {detail}");
}

#[test]
fn criterion_1_qiid_degradation_trend() {
    let sweep = sweep_result();
    let adas: Vec<f64> = sweep.points.iter().map(|p| p.mean_ada).collect();
    let at_zero = *adas.last().unwrap();
    let at_one = adas[0];
    let in_window = (0.43..=0.57).contains(&at_zero);
    let drop = at_one - at_zero >= 0.2;
    let non_increasing = adas.windows(2).all(|w| w[1] <= w[0] + 0.03);
    report_line(
        "1 (qIID degradation trend)",
        in_window && drop && non_increasing,
        &format!(
            "fedavg ADA over qIID {:?} = {adas:?}; ADA(0)={at_zero:.4} in [0.43,0.57]: {in_window}, \
             ADA(1)-ADA(0)={:.4}>=0.2: {drop}, non-increasing(+0.03): {non_increasing}",
            sweep.points.iter().map(|p| p.target_qiid).collect::<Vec<_>>(),
            at_one - at_zero
        ),
    );
}

#[test]
fn criterion_2_method_ordering() {
    let cmp = compare_result();
    let (faa, sl, fedavg, oneclass) = (
        cmp.faa.mean_ada,
        cmp.split_learning.mean_ada,
        cmp.fedavg.mean_ada,
        cmp.oneclass.mean_ada,
    );
    let ok = faa >= 0.90 && faa >= sl - 0.02 && sl >= fedavg + 0.15 && faa >= oneclass + 0.03;
    report_line(
        "2 (method ordering)",
        ok,
        &format!(
            "faa={faa:.4} (>=0.90), split={sl:.4} (faa>=split-0.02), \
             fedavg={fedavg:.4} (split>=fedavg+0.15), oneclass={oneclass:.4} (faa>=oneclass+0.03)"
        ),
    );
}

#[test]
fn criterion_3_communication_claim() {
    let cfg = acceptance_config();
    let data = prepare_data(&cfg).expect("data prep");
    let k = cfg.eval.num_enrolled;

    // FAA uplink = K messages, independent of the training epochs E.
    let faa_uplinks = |epochs: usize| -> usize {
        let mut c = cfg.clone();
        c.faa.epochs = epochs;
        c.faa.samples_per_user = 50;
        c.base_train.epochs = 1;
        let (_, transcript) = run_scenario(&c, &data, MethodSelection::Faa).expect("faa scenario");
        transcript.uplink_messages()
    };
    let faa_up_small = faa_uplinks(1);
    let faa_up_large = faa_uplinks(7);

    // FedAvg uplink = K × rounds.
    let mut fedavg_cfg = cfg.clone();
    fedavg_cfg.fedavg.rounds = 4;
    fedavg_cfg.fedavg.local_epochs = 1;
    let (_, fedavg_t) =
        run_scenario(&fedavg_cfg, &data, MethodSelection::Fedavg).expect("fedavg scenario");

    // Split-learning uplink count grows at least with epochs × batches.
    let mut split_cfg = cfg.clone();
    split_cfg.net.split_from_backbone = false;
    split_cfg.split.epochs = 2;
    let (_, split_t) =
        run_scenario(&split_cfg, &data, MethodSelection::SplitLearning).expect("split scenario");
    let samples_per_device = data.train_enrolled.len() / k;
    let batches_per_device = samples_per_device.div_ceil(split_cfg.split.batch_size);
    let total_batches = split_cfg.split.epochs * batches_per_device * k;

    let ok = faa_up_small == k
        && faa_up_large == k
        && fedavg_t.uplink_messages() == k * fedavg_cfg.fedavg.rounds
        && split_t.uplink_messages() >= total_batches;
    report_line(
        "3 (communication claim)",
        ok,
        &format!(
            "faa uplinks at E=1: {faa_up_small}, at E=7: {faa_up_large} (K={k}); \
             fedavg uplinks={} (K*R={}); split uplinks={} >= epochs*batches={total_batches}",
            fedavg_t.uplink_messages(),
            k * fedavg_cfg.fedavg.rounds,
            split_t.uplink_messages()
        ),
    );
}

#[test]
fn criterion_4_unknown_user_ablation_trend() {
    let ablation = ablation_result();
    let adas: Vec<f64> = ablation.rows.iter().map(|r| r.mean_ada).collect();
    let counts: Vec<usize> = ablation.rows.iter().map(|r| r.num_unknown).collect();
    let non_increasing = adas.windows(2).all(|w| w[1] <= w[0] + 0.01);
    report_line(
        "4 (unknown-user ablation trend)",
        counts == vec![4, 6, 8, 10] && non_increasing,
        &format!("faa mean ADA over unknown counts {counts:?} = {adas:?}, non-increasing(+0.01): {non_increasing}"),
    );
}

#[test]
fn criterion_5_numerical_oracles() {
    // Gradient fidelity on a 3-layer relu network.
    let mut rng = SeededRng::from_seed(501);
    let net = Network::dense(&[6, 12, 8, 4], &mut rng).unwrap();
    let mut x = Matrix::zeros(8, 6);
    for v in x.data.iter_mut() {
        *v = rng.uniform_in(-1.0, 1.0);
    }
    let labels: Vec<usize> = (0..8).map(|_| rng.index(4)).collect();
    let grad_err = grad_check(&net, &x, &labels, 1e-5).unwrap();

    // Split gradients equal monolithic backprop.
    let (f, c) = split_model(&net, 2).unwrap();
    let whole_grads = fedauth_core::nn::analytic_gradients(&net, &x, &labels).unwrap();
    let (features, f_cache) = f.forward(&x).unwrap();
    let (logits, c_cache) = c.forward(&features).unwrap();
    let (_, dlogits) = batch_softmax_xent(&logits, &labels).unwrap();
    let (c_grads, dfeatures) = c.backward(&c_cache, &dlogits).unwrap();
    let (f_grads, _) = f.backward(&f_cache, &dfeatures).unwrap();
    let mut split_err: f64 = 0.0;
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
            split_err = split_err.max((a - b).abs());
        }
        for (a, b) in split_layer.bias.iter().zip(&whole_layer.bias) {
            split_err = split_err.max((a - b).abs());
        }
    }

    // Impression estimation equals the brute-force definition.
    let mut feat = Matrix::zeros(300, 5);
    for v in feat.data.iter_mut() {
        *v = rng.uniform_in(-2.0, 2.0);
    }
    let imp = impression_from_features(0, &feat).unwrap();
    let mut imp_err: f64 = 0.0;
    let n = feat.rows as f64;
    for i in 0..5 {
        let mean_i: f64 = (0..feat.rows).map(|r| feat.get(r, i)).sum::<f64>() / n;
        imp_err = imp_err.max((imp.mu[i] - mean_i).abs());
        for j in 0..5 {
            let mean_j: f64 = (0..feat.rows).map(|r| feat.get(r, j)).sum::<f64>() / n;
            let cov: f64 = (0..feat.rows)
                .map(|r| (feat.get(r, i) - mean_i) * (feat.get(r, j) - mean_j))
                .sum::<f64>()
                / n;
            imp_err = imp_err.max((imp.sigma.get(i, j) - cov).abs());
        }
    }

    // Cholesky reconstruction within 1e-6.
    let eps = 1e-6;
    let sigma = imp.sigma.clone();
    let l = chol_psd(&sigma, eps).unwrap();
    let trace: f64 = (0..5).map(|i| sigma.get(i, i)).sum();
    let ridge = eps * (trace / 5.0).max(1.0);
    let rec = l.matmul(&l.transpose()).unwrap();
    let mut chol_err: f64 = 0.0;
    for i in 0..5 {
        for j in 0..5 {
            let target = sigma.get(i, j) + if i == j { ridge } else { 0.0 };
            chol_err = chol_err.max((rec.get(i, j) - target).abs());
        }
    }

    // Sampler moments at M = 10^4.
    let imp_fixed = UserImpression {
        user_id: 0,
        n: 100,
        mu: vec![1.0, -2.0, 0.5, 3.0],
        sigma: Matrix::from_rows(&[
            vec![2.0, 0.3, 0.0, 0.1],
            vec![0.3, 1.5, 0.2, 0.0],
            vec![0.0, 0.2, 1.0, 0.4],
            vec![0.1, 0.0, 0.4, 2.5],
        ])
        .unwrap(),
    };
    let m = 10_000;
    let samples = sample_user_features(&imp_fixed, m, eps, &mut SeededRng::from_seed(502)).unwrap();
    let mut emp_mu = [0.0; 4];
    for (fv, _) in &samples {
        for (a, &v) in emp_mu.iter_mut().zip(fv) {
            *a += v / m as f64;
        }
    }
    let mu_norm = imp_fixed.mu.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mean_err = emp_mu
        .iter()
        .zip(&imp_fixed.mu)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let trace4: f64 = (0..4).map(|i| imp_fixed.sigma.get(i, i)).sum();
    let ridge4 = eps * (trace4 / 4.0).max(1.0);
    let mut target = imp_fixed.sigma.clone();
    for i in 0..4 {
        target.data[i * 4 + i] += ridge4;
    }
    let mut emp_sigma = Matrix::zeros(4, 4);
    for (fv, _) in &samples {
        for i in 0..4 {
            for j in 0..4 {
                emp_sigma.data[i * 4 + j] += (fv[i] - emp_mu[i]) * (fv[j] - emp_mu[j]) / m as f64;
            }
        }
    }
    let mut diff = emp_sigma.clone();
    for (v, t) in diff.data.iter_mut().zip(&target.data) {
        *v -= t;
    }
    let cov_rel = diff.frobenius_norm() / target.frobenius_norm();
    let mean_ok = mean_err <= 0.05 * mu_norm + 0.05;
    let cov_ok = cov_rel <= 0.10;

    let ok = grad_err <= 1e-4
        && split_err <= 1e-10
        && imp_err <= 1e-9
        && chol_err <= 1e-6
        && mean_ok
        && cov_ok;
    report_line(
        "5 (numerical oracles)",
        ok,
        &format!(
            "grad_check={grad_err:.2e} (<=1e-4), split-vs-monolithic={split_err:.2e} (<=1e-10), \
             impression={imp_err:.2e} (<=1e-9), cholesky={chol_err:.2e} (<=1e-6), \
             sampler mean err={mean_err:.4} cov rel={cov_rel:.4}"
        ),
    );
}

#[test]
fn criterion_6_metric_oracles() {
    let mut rng = SeededRng::from_seed(601);

    // ADA identity is exact.
    let mut identity_exact = true;
    for _ in 0..200 {
        let set = ScoreSet {
            enrolled_user_id: 0,
            genuine_scores: (0..25).map(|_| rng.uniform_in(0.0, 3.0)).collect(),
            impostor_scores: (0..25).map(|_| rng.uniform_in(0.0, 3.0)).collect(),
        };
        let t = rng.uniform_in(-0.5, 3.5);
        let (ada, tpr, tnr) = ada_at_threshold(&set, t).unwrap();
        identity_exact &= ada == 0.5 * (tpr + tnr);
    }

    // best_ada matches a 1e-4-resolution grid within 1e-4.
    let mut grid_agrees = true;
    let mut max_grid_gap: f64 = 0.0;
    for _ in 0..5 {
        let set = ScoreSet {
            enrolled_user_id: 0,
            genuine_scores: (0..40).map(|_| rng.uniform_in(0.0, 1.0)).collect(),
            impostor_scores: (0..40).map(|_| rng.uniform_in(0.3, 1.3)).collect(),
        };
        let sweep_best = best_ada(&set).unwrap();
        let mut grid_best: f64 = 0.0;
        let mut t = -0.2;
        while t <= 1.6 {
            grid_best = grid_best.max(ada_at_threshold(&set, t).unwrap().0);
            t += 1e-4;
        }
        max_grid_gap = max_grid_gap.max((sweep_best.ada - grid_best).abs());
        grid_agrees &= (sweep_best.ada - grid_best).abs() <= 1e-4;
    }

    // auth_score equals an independent evaluation of the entropy-or-penalty
    // scoring rule, exactly, on 1000 random cases.
    let mut net_rng = SeededRng::from_seed(602);
    let f = Network::dense(&[6, 10], &mut net_rng).unwrap();
    let c = Network::dense(&[10, 8], &mut net_rng).unwrap();
    let model = fedauth_core::faa::AuthModel {
        feature_extractor: f,
        classifier: c,
        num_users: 8,
    };
    let mut scores_exact = true;
    for _ in 0..1000 {
        let x: Vec<f64> = (0..6).map(|_| net_rng.uniform_in(-2.0, 2.0)).collect();
        let claimed = net_rng.index(8);
        let ours = fedauth_core::eval::auth_score(&model, &x, claimed).unwrap();

        // Independent scoring path over the same logits.
        let logits = model.logits(&x).unwrap();
        let reference = {
            let max = logits.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            let exps: Vec<f64> = logits.iter().map(|&v| (v - max).exp()).collect();
            let total: f64 = exps.iter().sum();
            let p: Vec<f64> = exps.iter().map(|e| e / total).collect();
            let mut predicted = 0;
            for (i, &v) in p.iter().enumerate().skip(1) {
                if v > p[predicted] {
                    predicted = i;
                }
            }
            if predicted == claimed {
                let mut h = 0.0;
                for &v in &p {
                    if v > 0.0 {
                        h -= v * v.ln();
                    }
                }
                h
            } else {
                (8.0_f64).ln()
            }
        };
        scores_exact &= ours == reference;
    }

    let ok = identity_exact && grid_agrees && scores_exact;
    report_line(
        "6 (metric oracles)",
        ok,
        &format!(
            "ADA identity exact: {identity_exact}; sweep-vs-grid max gap {max_grid_gap:.2e} \
             (<=1e-4); entropy scores bit-equal on 1000 cases: {scores_exact}"
        ),
    );
}

#[test]
fn criterion_7_run_determinism() {
    let dir = std::env::temp_dir().join(format!("fedauth-acceptance-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();

    // A reduced configuration keeps the double run fast; determinism is a
    // property of the pipeline, not of the problem size.
    let mut cfg = acceptance_config();
    cfg.population.samples_per_user = 60;
    cfg.base_population.num_users = 8;
    cfg.base_population.samples_per_user = 60;
    cfg.net.hidden_dims = vec![24, 12];
    cfg.base_train.epochs = 5;
    cfg.faa.samples_per_user = 40;
    cfg.faa.epochs = 8;
    cfg.split.epochs = 2;
    cfg.fedavg.rounds = 2;
    cfg.fedavg.local_epochs = 2;
    cfg.output_dir = dir.join("a").display().to_string();
    let config_path = dir.join("config.json");
    std::fs::write(&config_path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();

    let run = |out: &std::path::Path| {
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_fedauth"))
            .args([
                "run",
                config_path.to_str().unwrap(),
                "--output-dir",
                out.to_str().unwrap(),
            ])
            .output()
            .expect("binary runs");
        assert!(
            status.status.success(),
            "run failed: {}",
            String::from_utf8_lossy(&status.stderr)
        );
    };
    run(&dir.join("a"));
    run(&dir.join("b"));

    let mut identical = true;
    let mut detail = String::new();
    for file in [
        "report.json",
        "transcript_faa.json",
        "transcript_fedavg.json",
        "transcript_split_learning.json",
        "authmodel.json",
    ] {
        let a = std::fs::read(dir.join("a").join(file)).unwrap();
        let b = std::fs::read(dir.join("b").join(file)).unwrap();
        if a != b {
            identical = false;
            detail.push_str(&format!("{file} differs; "));
        }
    }
    report_line(
        "7 (determinism)",
        identical,
        if detail.is_empty() {
            "two runs with identical config+seed produced byte-identical reports and transcripts"
        } else {
            &detail
        },
    );
}

#[test]
fn criterion_8_privacy_invariant() {
    // Structural: the payload alphabet has no variant that can carry raw
    // (sample, label) pairs. The match is exhaustive, so adding a variant
    // forces this test to be revisited; none of the existing kinds holds
    // sample data (they are tags, with sizes tracked on the message).
    for kind in PayloadKind::ALL {
        match kind {
            PayloadKind::ModelParams
            | PayloadKind::ImpressionPayload
            | PayloadKind::ActivationBatch
            | PayloadKind::GradientBatch
            | PayloadKind::Scalar => {}
        }
    }

    // Runtime: per-method transcripts contain only the expected kinds.
    let cmp = compare_result();
    let allowed = |t: &Transcript, allowed: &[PayloadKind]| {
        t.payload_kinds().iter().all(|k| allowed.contains(k))
    };
    let faa_ok = allowed(
        &cmp.faa_transcript,
        &[PayloadKind::ModelParams, PayloadKind::ImpressionPayload],
    );
    let fedavg_ok = allowed(&cmp.fedavg_transcript, &[PayloadKind::ModelParams]);
    let split_ok = allowed(
        &cmp.split_transcript,
        &[
            PayloadKind::ModelParams,
            PayloadKind::ActivationBatch,
            PayloadKind::GradientBatch,
        ],
    );

    // FAA uplink carries impressions only, never per-sample features.
    let faa_uplink_kinds: Vec<PayloadKind> = cmp
        .faa_transcript
        .messages()
        .iter()
        .filter(|m| m.direction == fedauth_core::protocol::Direction::DeviceToServer)
        .map(|m| m.payload)
        .collect();
    let uplink_ok = faa_uplink_kinds
        .iter()
        .all(|&k| k == PayloadKind::ImpressionPayload);

    let ok = faa_ok && fedavg_ok && split_ok && uplink_ok;
    report_line(
        "8 (privacy invariant)",
        ok,
        &format!(
            "payload alphabet fixed; faa kinds ok: {faa_ok} (uplink impressions only: {uplink_ok}), \
             fedavg kinds ok: {fedavg_ok}, split kinds ok: {split_ok}"
        ),
    );
}

/// End-to-end FAA sanity at small scale, kept alongside the acceptance
/// criteria: a 2-user separable population should authenticate near
/// perfectly and stay deterministic.
#[test]
fn faa_end_to_end_separable_sanity() {
    let pop = fedauth_core::datagen::gen_population(&PopulationSpec {
        num_users: 4,
        input_dim: 6,
        samples_per_user: 80,
        separation: 10.0,
        within_scale: 0.5,
        seed: 700,
    })
    .unwrap();
    let base = fedauth_core::datagen::gen_base_dataset(&PopulationSpec {
        num_users: 6,
        input_dim: 6,
        samples_per_user: 60,
        separation: 10.0,
        within_scale: 0.5,
        seed: 700,
    })
    .unwrap();
    let (train, test) = pop.data.split_train_test(0.5).unwrap();
    let devices: Vec<DeviceState> = (0..2)
        .map(|user| {
            let idx: Vec<usize> = train
                .samples
                .iter()
                .enumerate()
                .filter(|(_, s)| s.label == user)
                .map(|(i, _)| i)
                .collect();
            DeviceState::new(user as u64, train.subset(&idx), 701)
        })
        .collect();
    let mut rng = SeededRng::from_seed(702);
    let net = Network::dense(&[6, 16, 8, 6], &mut rng).unwrap();
    let base_cfg = TrainConfig {
        epochs: 20,
        batch_size: 32,
        learning_rate: 0.02,
        momentum: 0.9,
    };
    let faa_cfg = FaaConfig {
        samples_per_user: 100,
        epochs: 40,
        batch_size: 25,
        learning_rate: 0.02,
        momentum: 0.9,
        cov_reg_eps: 1e-6,
        diag_only: false,
    };
    let (model, transcript) =
        faa_train(net, &base.data, &base_cfg, &devices, &faa_cfg, 2, 703).unwrap();
    assert_eq!(transcript.uplink_messages(), 2);

    let report = fedauth_core::eval::evaluate_method(&model, &test, &[0, 1], &[2, 3]).unwrap();
    assert!(
        report.mean_ada >= 0.95,
        "separable 2-user ADA {}",
        report.mean_ada
    );
}

/// The scenario driver produces the same artifacts as the underlying
/// training entry points.
#[test]
fn run_scenario_artifacts_have_expected_shapes() {
    let mut cfg = acceptance_config();
    cfg.population.samples_per_user = 60;
    cfg.base_population.num_users = 8;
    cfg.base_population.samples_per_user = 60;
    cfg.net.hidden_dims = vec![16, 8];
    cfg.base_train.epochs = 3;
    cfg.faa.samples_per_user = 30;
    cfg.faa.epochs = 4;
    cfg.split.epochs = 1;
    cfg.fedavg.rounds = 1;
    cfg.fedavg.local_epochs = 1;
    let data = prepare_data(&cfg).unwrap();

    let (artifact, _) = run_scenario(&cfg, &data, MethodSelection::Faa).unwrap();
    match artifact {
        TrainedArtifact::Auth(model) => {
            assert_eq!(model.num_users, 10);
            assert_eq!(model.feature_extractor.input_dim(), 24);
        }
        TrainedArtifact::Global(_) => panic!("faa yields an auth model"),
    }
    let (artifact, _) = run_scenario(&cfg, &data, MethodSelection::Fedavg).unwrap();
    match artifact {
        TrainedArtifact::Global(net) => assert_eq!(net.output_dim(), 10),
        TrainedArtifact::Auth(_) => panic!("fedavg yields a global network"),
    }
}
