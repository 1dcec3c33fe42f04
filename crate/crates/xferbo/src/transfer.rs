//! Source recalibration, similarity scoring and the weighted ensemble.
//!
//! Each source data set is wrapped in a GP once and then adjusted against the
//! current target data through an affine map `y -> alpha * y + beta` fitted by
//! least squares. Sources are scored on three criteria (rank agreement,
//! post-adjustment accuracy, predictive variance), the scores are blended into
//! model probabilities, and the probability-weighted combination of adjusted
//! source predictions forms the ensemble surrogate.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::doe::DoeColumn;
use crate::error::Error;
use crate::gp::{train_gp, GpModel, KernelKind, Prediction, Surrogate, TrainConfig};
use crate::seed;

/// Which variance the ensemble reports: the target GP's own predictive
/// variance (TV) or the probability-weighted aggregate of the adjusted
/// source variances (AV).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VariancePolicy {
    #[serde(rename = "TV")]
    TargetVariance,
    #[serde(rename = "AV")]
    AggregateVariance,
}

/// Scoring presets: objectives weight rank agreement and variance only,
/// constraints weight all three criteria equally.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriteriaRole {
    Objective,
    Constraint,
}

/// Per-criterion blend weights; nonnegative, summing to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriteriaWeights {
    pub shape: f64,
    pub accuracy: f64,
    pub variance: f64,
}

impl CriteriaWeights {
    pub fn for_role(role: CriteriaRole) -> CriteriaWeights {
        match role {
            CriteriaRole::Objective => CriteriaWeights { shape: 0.5, accuracy: 0.0, variance: 0.5 },
            CriteriaRole::Constraint => {
                let w = 1.0 / 3.0;
                CriteriaWeights { shape: w, accuracy: w, variance: w }
            }
        }
    }

    fn validate(&self) -> Result<(), Error> {
        let vals = [self.shape, self.accuracy, self.variance];
        if vals.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidInput("criteria weights must be nonnegative".into()));
        }
        let sum: f64 = vals.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!("criteria weights must sum to 1, got {sum}")));
        }
        Ok(())
    }
}

/// Similarity-scoring configuration. `weights: None` selects the preset of
/// whichever role is passed to the scoring call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriteriaConfig {
    /// Explicit criterion weights; `None` uses the role preset.
    pub weights: Option<CriteriaWeights>,
    /// Epanechnikov bandwidth shared by all three criteria.
    pub bandwidth: f64,
    /// Relative-error threshold of the accuracy criterion.
    pub max_rel_error: f64,
    /// Relative-sd threshold of the variance criterion.
    pub max_rel_variance: f64,
    /// Adds the target GP itself as an ensemble member, scored by its
    /// leave-one-out predictions.
    pub include_target_member: bool,
}

impl Default for CriteriaConfig {
    fn default() -> Self {
        CriteriaConfig {
            weights: None,
            bandwidth: 1.0,
            max_rel_error: 0.05,
            max_rel_variance: 0.1,
            include_target_member: false,
        }
    }
}

impl CriteriaConfig {
    pub fn effective_weights(&self, role: CriteriaRole) -> CriteriaWeights {
        self.weights.unwrap_or_else(|| CriteriaWeights::for_role(role))
    }

    fn validate(&self, role: CriteriaRole) -> Result<(), Error> {
        self.effective_weights(role).validate()?;
        if !(self.bandwidth > 0.0) || !self.bandwidth.is_finite() {
            return Err(Error::InvalidInput("bandwidth must be positive".into()));
        }
        if !(self.max_rel_error > 0.0) || !(self.max_rel_variance > 0.0) {
            return Err(Error::InvalidInput("criteria thresholds must be positive".into()));
        }
        Ok(())
    }
}

/// Discrepancy values and the blended score of one candidate member.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriteriaScores {
    pub tau_shape: f64,
    pub tau_accuracy: f64,
    pub tau_variance: f64,
    /// Weighted sum of the per-criterion kernel values, before
    /// normalization into a probability.
    pub combined: f64,
}

/// One recalibrated source in the ensemble.
#[derive(Debug, Clone)]
pub struct SourceModel {
    pub name: String,
    pub gp: Arc<GpModel>,
    pub alpha: f64,
    pub beta: f64,
    pub criteria_scores: CriteriaScores,
    pub probability: f64,
}

impl SourceModel {
    /// Wraps a trained source GP with the identity adjustment and empty
    /// scores; `fit_transfer` and `score_and_weight` fill the rest.
    pub fn new(name: impl Into<String>, gp: Arc<GpModel>) -> SourceModel {
        SourceModel {
            name: name.into(),
            gp,
            alpha: 1.0,
            beta: 0.0,
            criteria_scores: CriteriaScores {
                tau_shape: 0.0,
                tau_accuracy: 0.0,
                tau_variance: 0.0,
                combined: 0.0,
            },
            probability: 0.0,
        }
    }

    pub fn adjusted_predict(&self, x: &[f64]) -> Prediction {
        let p = self.gp.predict(x);
        Prediction { mean: self.alpha * p.mean + self.beta, sd: self.alpha.abs() * p.sd }
    }
}

/// Per-source entry of the ensemble diagnostics dump.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SourceDiagnostic {
    pub name: String,
    pub alpha: f64,
    pub beta: f64,
    pub tau_shape: f64,
    pub tau_accuracy: f64,
    pub tau_variance: f64,
    pub probability: f64,
}

/// Result of probability assignment.
#[derive(Debug, Clone)]
pub struct WeightOutcome {
    pub probabilities: Vec<f64>,
    /// True when every combined score was zero and the probabilities fell
    /// back to uniform.
    pub no_informative_source: bool,
}

/// Trained source GPs, reusable across optimizer iterations. Slot `j`
/// corresponds to source `j` of the (fixed) source list.
#[derive(Debug, Clone, Default)]
pub struct SourceGpCache {
    models: Vec<Option<Arc<GpModel>>>,
}

impl SourceGpCache {
    pub fn new() -> SourceGpCache {
        SourceGpCache::default()
    }

    pub fn get(&self, idx: usize) -> Option<Arc<GpModel>> {
        self.models.get(idx).and_then(|m| m.clone())
    }

    pub fn insert(&mut self, idx: usize, model: Arc<GpModel>) {
        if self.models.len() <= idx {
            self.models.resize(idx + 1, None);
        }
        self.models[idx] = Some(model);
    }

    fn get_or_train(
        &mut self,
        idx: usize,
        train: impl FnOnce() -> Result<GpModel, Error>,
    ) -> Result<Arc<GpModel>, Error> {
        if let Some(m) = self.get(idx) {
            return Ok(m);
        }
        let model = Arc::new(train()?);
        self.insert(idx, model.clone());
        Ok(model)
    }
}

/// Probability-weighted combination of adjusted source surrogates. With no
/// surviving sources it degenerates to the target GP alone.
#[derive(Debug, Clone)]
pub struct EnsembleSurrogate {
    pub sources: Vec<SourceModel>,
    pub target_gp: Arc<GpModel>,
    pub variance_policy: VariancePolicy,
    no_informative_source: bool,
}

impl EnsembleSurrogate {
    /// Assembles an ensemble from already-fitted members. Probabilities are
    /// taken as stored; most callers want [`build_ensemble`] instead.
    pub fn from_parts(
        sources: Vec<SourceModel>,
        target_gp: Arc<GpModel>,
        variance_policy: VariancePolicy,
    ) -> EnsembleSurrogate {
        EnsembleSurrogate { sources, target_gp, variance_policy, no_informative_source: false }
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.sources.iter().map(|s| s.probability).collect()
    }

    pub fn no_informative_source(&self) -> bool {
        self.no_informative_source
    }

    pub fn diagnostics(&self) -> Vec<SourceDiagnostic> {
        self.sources
            .iter()
            .map(|s| SourceDiagnostic {
                name: s.name.clone(),
                alpha: s.alpha,
                beta: s.beta,
                tau_shape: s.criteria_scores.tau_shape,
                tau_accuracy: s.criteria_scores.tau_accuracy,
                tau_variance: s.criteria_scores.tau_variance,
                probability: s.probability,
            })
            .collect()
    }
}

impl Surrogate for EnsembleSurrogate {
    fn predict(&self, x: &[f64]) -> Prediction {
        let target = self.target_gp.predict(x);
        if self.sources.is_empty() {
            return target;
        }
        let mut mean = 0.0;
        let mut agg_var = 0.0;
        for s in &self.sources {
            let p = s.adjusted_predict(x);
            mean += s.probability * p.mean;
            agg_var += (s.probability * p.sd).powi(2);
        }
        let sd = match self.variance_policy {
            VariancePolicy::TargetVariance => target.sd,
            VariancePolicy::AggregateVariance => agg_var.sqrt(),
        };
        Prediction { mean, sd }
    }
}

/// Least-squares fit of target observations on the source GP's predictions
/// at the target inputs; returns the `(alpha, beta)` of the affine
/// adjustment `alpha * prediction + beta`. Constant predictions get
/// `alpha = 0` and `beta = mean(Y_T)`.
pub fn fit_transfer(source_gp: &GpModel, target: DoeColumn<'_>) -> (f64, f64) {
    let n = target.n();
    let preds: Vec<f64> = (0..n)
        .map(|i| source_gp.predict(&target.inputs.row(i).to_vec()).mean)
        .collect();
    fit_affine(&preds, &target.outputs.to_vec())
}

fn fit_affine(s: &[f64], t: &[f64]) -> (f64, f64) {
    let n = s.len() as f64;
    let s_mean = s.iter().sum::<f64>() / n;
    let t_mean = t.iter().sum::<f64>() / n;
    let denom: f64 = s.iter().map(|v| (v - s_mean).powi(2)).sum();
    if denom <= 1e-30 {
        return (0.0, t_mean);
    }
    let cov: f64 = s.iter().zip(t).map(|(a, b)| (a - s_mean) * (b - t_mean)).sum();
    let alpha = cov / denom;
    (alpha, t_mean - alpha * s_mean)
}

/// Rank-disagreement discrepancy between two output vectors: the number of
/// index pairs `(m, k)`, `m` over all points and `k` over all but the
/// first, whose strict orderings disagree, divided by `n`. The index set
/// (including `m = k`) is intentional; see the tests for the reference
/// enumeration.
pub fn discordant_tau(source_preds: &[f64], target_vals: &[f64]) -> f64 {
    let n = source_preds.len();
    assert_eq!(n, target_vals.len(), "vectors must have equal length");
    assert!(n >= 2, "rank comparison needs at least two points");
    let mut count = 0u64;
    for m in 0..n {
        for k in 1..n {
            let ds = source_preds[m] < source_preds[k];
            let dt = target_vals[m] < target_vals[k];
            if ds != dt {
                count += 1;
            }
        }
    }
    count as f64 / n as f64
}

/// Epanechnikov kernel of the normalized discrepancy:
/// `3/4 (1 - (tau/rho)^2)` inside the bandwidth, zero beyond it.
pub fn epanechnikov(tau: f64, rho: f64) -> f64 {
    assert!(rho > 0.0, "bandwidth must be positive");
    let t = tau / rho;
    if t.abs() <= 1.0 {
        0.75 * (1.0 - t * t)
    } else {
        0.0
    }
}

/// Fraction of points whose relative error exceeds `eps_max`. Target values
/// below 1e-12 in magnitude switch that term to absolute error.
pub fn accuracy_tau(source_preds: &[f64], target_vals: &[f64], eps_max: f64) -> f64 {
    let n = source_preds.len();
    assert_eq!(n, target_vals.len(), "vectors must have equal length");
    assert!(n > 0, "accuracy criterion needs at least one point");
    let violations = source_preds
        .iter()
        .zip(target_vals)
        .filter(|(s, t)| {
            let err = (*s - *t).abs();
            let rel = if t.abs() < 1e-12 { err } else { err / t.abs() };
            rel > eps_max
        })
        .count();
    violations as f64 / n as f64
}

/// Fraction of points whose predictive sd exceeds `sigma_max` relative to
/// the largest observed target magnitude (strictly). A zero target scale
/// yields 0 with a warning.
pub fn variance_tau(source_sds: &[f64], target_vals: &[f64], sigma_max: f64) -> f64 {
    assert!(!source_sds.is_empty(), "variance criterion needs at least one point");
    let y_max = target_vals.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if y_max == 0.0 {
        log::warn!("variance criterion has no output scale (all target values zero); returning 0");
        return 0.0;
    }
    let violations = source_sds.iter().filter(|s| **s / y_max > sigma_max).count();
    violations as f64 / source_sds.len() as f64
}

struct MemberEval {
    raw_means: Vec<f64>,
    adj_means: Vec<f64>,
    adj_sds: Vec<f64>,
}

fn eval_source(s: &SourceModel, target: &DoeColumn<'_>) -> MemberEval {
    let n = target.n();
    let mut raw_means = Vec::with_capacity(n);
    let mut adj_means = Vec::with_capacity(n);
    let mut adj_sds = Vec::with_capacity(n);
    for i in 0..n {
        let p = s.gp.predict(&target.inputs.row(i).to_vec());
        raw_means.push(p.mean);
        adj_means.push(s.alpha * p.mean + s.beta);
        adj_sds.push(s.alpha.abs() * p.sd);
    }
    MemberEval { raw_means, adj_means, adj_sds }
}

/// Rank agreement is judged on raw source predictions so that a negatively
/// correlated source cannot launder its reversed ordering through the
/// affine adjustment; accuracy and variance are judged after adjustment,
/// matching what actually enters the ensemble.
fn criteria_for(eval: &MemberEval, target_vals: &[f64], config: &CriteriaConfig, weights: &CriteriaWeights) -> CriteriaScores {
    let tau_shape =
        if target_vals.len() >= 2 { discordant_tau(&eval.raw_means, target_vals) } else { 0.0 };
    let tau_accuracy = accuracy_tau(&eval.adj_means, target_vals, config.max_rel_error);
    let tau_variance = variance_tau(&eval.adj_sds, target_vals, config.max_rel_variance);
    let rho = config.bandwidth;
    let combined = weights.shape * epanechnikov(tau_shape, rho)
        + weights.accuracy * epanechnikov(tau_accuracy, rho)
        + weights.variance * epanechnikov(tau_variance, rho);
    CriteriaScores { tau_shape, tau_accuracy, tau_variance, combined }
}

fn normalize_scores(scores: &[f64]) -> (Vec<f64>, bool) {
    let total: f64 = scores.iter().sum();
    if total <= 0.0 {
        let n = scores.len();
        return (vec![1.0 / n as f64; n], true);
    }
    (scores.iter().map(|c| c / total).collect(), false)
}

/// Scores each source against the target data and assigns normalized model
/// probabilities, writing both back into the source models. With every
/// combined score at zero the probabilities fall back to uniform and the
/// outcome is flagged.
pub fn score_and_weight(
    sources: &mut [SourceModel],
    target: DoeColumn<'_>,
    config: &CriteriaConfig,
    role: CriteriaRole,
) -> Result<WeightOutcome, Error> {
    if sources.is_empty() {
        return Err(Error::InvalidInput("scoring needs at least one source".into()));
    }
    if target.n() == 0 {
        return Err(Error::InvalidInput("scoring needs a nonempty target sample".into()));
    }
    config.validate(role)?;
    let weights = config.effective_weights(role);
    let target_vals: Vec<f64> = target.outputs.to_vec();
    let mut combined = Vec::with_capacity(sources.len());
    for s in sources.iter_mut() {
        let eval = eval_source(s, &target);
        s.criteria_scores = criteria_for(&eval, &target_vals, config, &weights);
        combined.push(s.criteria_scores.combined);
    }
    let (probabilities, no_informative) = normalize_scores(&combined);
    if no_informative {
        log::warn!(
            "no informative source for '{}': all similarity scores are zero, using uniform probabilities",
            target.name
        );
    }
    for (s, p) in sources.iter_mut().zip(&probabilities) {
        s.probability = *p;
    }
    Ok(WeightOutcome { probabilities, no_informative_source: no_informative })
}

/// Builds the full transfer ensemble for one output column: trains (or
/// reuses) a GP per source, fits the affine adjustment of each against the
/// target data, scores and weights the sources, and wraps the result
/// together with a freshly trained target GP.
///
/// Sources whose GP fails to train are dropped with a warning; when all
/// drop, the ensemble degenerates to the target GP alone. When
/// `config.include_target_member` is set, the target GP also joins as a
/// member scored by its leave-one-out predictions.
pub fn build_ensemble(
    source_does: &[DoeColumn<'_>],
    target: DoeColumn<'_>,
    config: &CriteriaConfig,
    role: CriteriaRole,
    variance_policy: VariancePolicy,
    train: &TrainConfig,
    cache: &mut SourceGpCache,
) -> Result<EnsembleSurrogate, Error> {
    if source_does.is_empty() {
        return Err(Error::InvalidInput("ensemble needs at least one source".into()));
    }
    if target.n() == 0 {
        return Err(Error::InvalidInput("ensemble needs a nonempty target sample".into()));
    }
    config.validate(role)?;
    let target_gp = Arc::new(train_gp(target.clone(), KernelKind::Se, train)?);

    let mut sources: Vec<SourceModel> = Vec::with_capacity(source_does.len());
    for (j, col) in source_does.iter().enumerate() {
        let trained = cache.get_or_train(j, || {
            let cfg = train
                .clone()
                .with_seed(seed::derive_seed(train.seed, &[seed::tag::TRAIN, j as u64]));
            train_gp(col.clone(), KernelKind::Kpls { max_components: None }, &cfg)
        });
        match trained {
            Ok(gp) => {
                let mut s = SourceModel::new(col.name, gp);
                let (alpha, beta) = fit_transfer(&s.gp, target.clone());
                s.alpha = alpha;
                s.beta = beta;
                sources.push(s);
            }
            Err(err) => {
                log::warn!("dropping source '{}': {err}", col.name);
            }
        }
    }

    if sources.is_empty() {
        log::warn!(
            "all sources dropped for '{}': ensemble degenerates to the target GP",
            target.name
        );
        return Ok(EnsembleSurrogate {
            sources,
            target_gp,
            variance_policy,
            no_informative_source: false,
        });
    }

    let weights = config.effective_weights(role);
    let target_vals: Vec<f64> = target.outputs.to_vec();
    for s in sources.iter_mut() {
        let eval = eval_source(s, &target);
        s.criteria_scores = criteria_for(&eval, &target_vals, config, &weights);
    }
    if config.include_target_member {
        // The target GP joins with the identity adjustment, scored on its
        // leave-one-out predictions (predicting at its own training points
        // would score it perfectly regardless of fit quality).
        let loo = target_gp.loo_predictions();
        let eval = MemberEval {
            raw_means: loo.iter().map(|p| p.mean).collect(),
            adj_means: loo.iter().map(|p| p.mean).collect(),
            adj_sds: loo.iter().map(|p| p.sd).collect(),
        };
        let mut member = SourceModel::new(format!("{}:target", target.name), target_gp.clone());
        member.criteria_scores = criteria_for(&eval, &target_vals, config, &weights);
        sources.push(member);
    }
    let combined: Vec<f64> = sources.iter().map(|s| s.criteria_scores.combined).collect();
    let (probabilities, no_informative) = normalize_scores(&combined);
    for (s, p) in sources.iter_mut().zip(&probabilities) {
        s.probability = *p;
    }
    if no_informative {
        log::warn!(
            "no informative source for '{}': all similarity scores are zero, using uniform probabilities",
            target.name
        );
    }

    Ok(EnsembleSurrogate { sources, target_gp, variance_policy, no_informative_source: no_informative })
}
