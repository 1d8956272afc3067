//! Authentication scoring and detection-accuracy metrics.
//!
//! The entropy score of a claim: run the input through the model, take the
//! softmax prediction vector p, and score
//!
//!   entropy(p)      when the predicted user equals the claimed user,
//!   ln K            otherwise (the entropy of the uniform vector),
//!
//! so higher scores mean more likely unauthorized. Detection accuracy is
//! ADA = 0.5·(TPR + TNR) with genuine samples accepted below a threshold
//! and impostor samples rejected at or above it.

use serde::{Deserialize, Serialize};

use crate::baselines::{oneclass_score_features, OneClassModel};
use crate::datagen::LabeledDataset;
use crate::error::{Error, Result};
use crate::faa::AuthModel;
use crate::nn::{argmax, entropy, softmax, Network};

/// Genuine and impostor scores collected for one enrolled user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSet {
    pub enrolled_user_id: usize,
    pub genuine_scores: Vec<f64>,
    pub impostor_scores: Vec<f64>,
}

/// Per-user detection accuracy at that user's best threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerUserAda {
    pub user_id: usize,
    pub best_threshold: f64,
    pub ada: f64,
    pub tpr: f64,
    pub tnr: f64,
}

/// Oracle-threshold detection accuracy over all enrolled users.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaReport {
    pub per_user: Vec<PerUserAda>,
    pub mean_ada: f64,
    pub std_ada: f64,
}

impl AdaReport {
    fn from_per_user(per_user: Vec<PerUserAda>) -> Self {
        let n = per_user.len() as f64;
        let mean_ada = per_user.iter().map(|r| r.ada).sum::<f64>() / n;
        let var = per_user
            .iter()
            .map(|r| (r.ada - mean_ada) * (r.ada - mean_ada))
            .sum::<f64>()
            / n;
        Self {
            per_user,
            mean_ada,
            std_ada: var.sqrt(),
        }
    }

    /// Per-user rows as CSV, one line per enrolled user.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("user_id,best_threshold,ada,tpr,tnr\n");
        for r in &self.per_user {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.user_id, r.best_threshold, r.ada, r.tpr, r.tnr
            ));
        }
        out
    }
}

/// Entropy score of a claim given raw logits.
pub fn entropy_score_from_logits(logits: &[f64], claimed_id: usize) -> Result<f64> {
    let k = logits.len();
    if claimed_id >= k {
        return Err(Error::Input(format!(
            "claimed id {claimed_id} outside {k} enrolled users"
        )));
    }
    let p = softmax(logits);
    let predicted = argmax(&p);
    if predicted == claimed_id {
        entropy(&p)
    } else {
        Ok((k as f64).ln())
    }
}

/// Entropy score of claiming identity `claimed_id` for input `x`.
pub fn auth_score(model: &AuthModel, x: &[f64], claimed_id: usize) -> Result<f64> {
    if claimed_id >= model.num_users {
        return Err(Error::Input(format!(
            "claimed id {claimed_id} outside {} enrolled users",
            model.num_users
        )));
    }
    let logits = model.logits(x)?;
    entropy_score_from_logits(&logits, claimed_id)
}

/// Anything that can score "input x claims to be enrolled user i".
/// Higher scores mean more likely unauthorized.
pub trait AuthScorer: Sync {
    fn score(&self, x: &[f64], claimed_id: usize) -> Result<f64>;
}

impl AuthScorer for AuthModel {
    fn score(&self, x: &[f64], claimed_id: usize) -> Result<f64> {
        auth_score(self, x, claimed_id)
    }
}

/// Entropy scorer over a monolithic K-way network (FedAvg's global model).
pub struct MonolithicScorer<'a>(pub &'a Network);

impl AuthScorer for MonolithicScorer<'_> {
    fn score(&self, x: &[f64], claimed_id: usize) -> Result<f64> {
        let logits = self.0.forward_one(x)?;
        entropy_score_from_logits(&logits, claimed_id)
    }
}

/// Mahalanobis scorer over per-user one-class models sharing one extractor.
pub struct OneClassScorer<'a> {
    pub models: &'a [OneClassModel],
    pub extractor: &'a Network,
}

impl AuthScorer for OneClassScorer<'_> {
    fn score(&self, x: &[f64], claimed_id: usize) -> Result<f64> {
        let model = self.models.get(claimed_id).ok_or_else(|| {
            Error::Input(format!(
                "claimed id {claimed_id} outside {} enrolled users",
                self.models.len()
            ))
        })?;
        let features = self.extractor.forward_one(x)?;
        oneclass_score_features(model, &features)
    }
}

impl<F> AuthScorer for F
where
    F: Fn(&[f64], usize) -> f64 + Sync,
{
    fn score(&self, x: &[f64], claimed_id: usize) -> Result<f64> {
        Ok(self(x, claimed_id))
    }
}

/// TPR/TNR/ADA at a fixed threshold: genuine accepted when score < t,
/// impostors rejected when score >= t.
pub fn ada_at_threshold(set: &ScoreSet, threshold: f64) -> Result<(f64, f64, f64)> {
    if set.genuine_scores.is_empty() || set.impostor_scores.is_empty() {
        return Err(Error::Input(
            "ADA needs non-empty genuine and impostor score lists".into(),
        ));
    }
    let tpr = set
        .genuine_scores
        .iter()
        .filter(|&&s| s < threshold)
        .count() as f64
        / set.genuine_scores.len() as f64;
    let tnr = set
        .impostor_scores
        .iter()
        .filter(|&&s| s >= threshold)
        .count() as f64
        / set.impostor_scores.len() as f64;
    Ok((0.5 * (tpr + tnr), tpr, tnr))
}

/// Result of the exact threshold sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestAda {
    pub threshold: f64,
    pub ada: f64,
    pub tpr: f64,
    pub tnr: f64,
}

/// Exact maximizer of ADA over thresholds: evaluates every midpoint between
/// consecutive distinct pooled scores plus below-all/above-all sentinels.
/// Ties resolve to the lowest threshold.
pub fn best_ada(set: &ScoreSet) -> Result<BestAda> {
    if set.genuine_scores.is_empty() || set.impostor_scores.is_empty() {
        return Err(Error::Input(
            "ADA needs non-empty genuine and impostor score lists".into(),
        ));
    }
    let mut pooled: Vec<f64> = set
        .genuine_scores
        .iter()
        .chain(set.impostor_scores.iter())
        .copied()
        .collect();
    pooled.sort_by(|a, b| a.partial_cmp(b).expect("scores must not be NaN"));
    pooled.dedup();

    let mut candidates = Vec::with_capacity(pooled.len() + 1);
    candidates.push(pooled[0] - 1.0);
    for pair in pooled.windows(2) {
        candidates.push(0.5 * (pair[0] + pair[1]));
    }
    candidates.push(pooled[pooled.len() - 1] + 1.0);

    let mut best: Option<BestAda> = None;
    for t in candidates {
        let (ada, tpr, tnr) = ada_at_threshold(set, t)?;
        if best.is_none_or(|b| ada > b.ada) {
            best = Some(BestAda {
                threshold: t,
                ada,
                tpr,
                tnr,
            });
        }
    }
    Ok(best.expect("candidates are never empty"))
}

fn worker_threads() -> usize {
    let available = std::thread::available_parallelism().map_or(1, |n| n.get());
    match std::env::var("FEDAUTH_THREADS") {
        Ok(v) => v
            .parse::<usize>()
            .ok()
            .filter(|&n| n >= 1)
            .map_or(available, |n| n.min(available)),
        Err(_) => available.min(8),
    }
}

/// Score every row of `inputs` with a fixed claimed id, chunk-parallel over
/// samples. Results are written in input order, so the output is identical
/// for any worker count.
fn score_samples<S: AuthScorer + ?Sized>(
    scorer: &S,
    inputs: &[&[f64]],
    claimed_id: usize,
) -> Result<Vec<f64>> {
    let threads = worker_threads().min(inputs.len().max(1));
    if threads <= 1 || inputs.len() < 64 {
        return inputs.iter().map(|x| scorer.score(x, claimed_id)).collect();
    }
    let chunk_size = inputs.len().div_ceil(threads);
    let mut results: Vec<Result<Vec<f64>>> = Vec::new();
    std::thread::scope(|scope| {
        let handles: Vec<_> = inputs
            .chunks(chunk_size)
            .map(|chunk| {
                scope.spawn(move || {
                    chunk
                        .iter()
                        .map(|x| scorer.score(x, claimed_id))
                        .collect::<Result<Vec<f64>>>()
                })
            })
            .collect();
        for handle in handles {
            results.push(handle.join().expect("scoring thread panicked"));
        }
    });
    let mut out = Vec::with_capacity(inputs.len());
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

/// Collect the genuine/impostor score sets for one enrolled user.
pub fn collect_scores<S: AuthScorer + ?Sized>(
    scorer: &S,
    test_data: &LabeledDataset,
    enrolled_id: usize,
    unknown_ids: &[usize],
) -> Result<ScoreSet> {
    let genuine_inputs: Vec<&[f64]> = test_data
        .samples
        .iter()
        .filter(|s| s.label == enrolled_id)
        .map(|s| s.x.as_slice())
        .collect();
    let impostor_inputs: Vec<&[f64]> = test_data
        .samples
        .iter()
        .filter(|s| unknown_ids.contains(&s.label))
        .map(|s| s.x.as_slice())
        .collect();
    if genuine_inputs.is_empty() {
        return Err(Error::Input(format!(
            "no test samples for enrolled user {enrolled_id}"
        )));
    }
    if impostor_inputs.is_empty() {
        return Err(Error::Input("no unknown-user test samples".into()));
    }
    Ok(ScoreSet {
        enrolled_user_id: enrolled_id,
        genuine_scores: score_samples(scorer, &genuine_inputs, enrolled_id)?,
        impostor_scores: score_samples(scorer, &impostor_inputs, enrolled_id)?,
    })
}

/// Oracle-threshold ADA over every enrolled user: genuine scores come from
/// the user's own test samples, impostor scores from all unknown users'
/// samples claiming that identity.
pub fn evaluate_method<S: AuthScorer + ?Sized>(
    scorer: &S,
    test_data: &LabeledDataset,
    enrolled_ids: &[usize],
    unknown_ids: &[usize],
) -> Result<AdaReport> {
    if enrolled_ids.is_empty() || unknown_ids.is_empty() {
        return Err(Error::Input("need enrolled and unknown user ids".into()));
    }
    if enrolled_ids.iter().any(|id| unknown_ids.contains(id)) {
        return Err(Error::Input(
            "enrolled and unknown user id sets overlap".into(),
        ));
    }
    let mut per_user = Vec::with_capacity(enrolled_ids.len());
    let mut ordered = enrolled_ids.to_vec();
    ordered.sort_unstable();
    for &user in &ordered {
        let set = collect_scores(scorer, test_data, user, unknown_ids)?;
        let best = best_ada(&set)?;
        per_user.push(PerUserAda {
            user_id: user,
            best_threshold: best.threshold,
            ada: best.ada,
            tpr: best.tpr,
            tnr: best.tnr,
        });
    }
    Ok(AdaReport::from_per_user(per_user))
}

/// Validation-calibrated alternative to [`evaluate_method`]: each user's
/// threshold is chosen on a calibration split and then applied, fixed, to
/// the test scores.
pub fn evaluate_method_calibrated<S: AuthScorer + ?Sized>(
    scorer: &S,
    calibration_data: &LabeledDataset,
    test_data: &LabeledDataset,
    enrolled_ids: &[usize],
    unknown_ids: &[usize],
) -> Result<AdaReport> {
    if enrolled_ids.is_empty() || unknown_ids.is_empty() {
        return Err(Error::Input("need enrolled and unknown user ids".into()));
    }
    if enrolled_ids.iter().any(|id| unknown_ids.contains(id)) {
        return Err(Error::Input(
            "enrolled and unknown user id sets overlap".into(),
        ));
    }
    let mut per_user = Vec::with_capacity(enrolled_ids.len());
    let mut ordered = enrolled_ids.to_vec();
    ordered.sort_unstable();
    for &user in &ordered {
        let calib = collect_scores(scorer, calibration_data, user, unknown_ids)?;
        let threshold = best_ada(&calib)?.threshold;
        let test = collect_scores(scorer, test_data, user, unknown_ids)?;
        let (ada, tpr, tnr) = ada_at_threshold(&test, threshold)?;
        per_user.push(PerUserAda {
            user_id: user,
            best_threshold: threshold,
            ada,
            tpr,
            tnr,
        });
    }
    Ok(AdaReport::from_per_user(per_user))
}
