//! Gaussian process regression with squared exponential and KPLS kernels.
//!
//! Internals follow the constant-mean Kriging formulation: the kernel is
//! split into a process variance and a unit-diagonal correlation matrix, the
//! mean bias comes from its generalized-least-squares closed form and the
//! process variance from its profiled closed form, so hyperparameter
//! training only searches over correlation parameters (log length scales or
//! log rates). Inputs are normalized to the unit hypercube of their variable
//! bounds and outputs are standardized internally; predictions are mapped
//! back to original units.

use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::doe::{DoeColumn, VariableMeta};
use crate::error::Error;
use crate::kernel::{kpls_correlation, se_correlation, KplsParams, SeKernelParams};
use crate::linalg::Cholesky;
use crate::pls::pls_weight_matrix;
use crate::seed;
use crate::simplex::nelder_mead;

/// Floor applied to the profiled process variance; keeps constant-output
/// training finite. Outputs are standardized, so this is a relative floor.
const SIGMA2_FLOOR: f64 = 1e-10;

/// Floor applied to the output standard deviation used for standardization.
const Y_STD_FLOOR: f64 = 1e-12;

/// Kernel family selector for training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum KernelKind {
    Se,
    /// KPLS with at most `max_components` retained components
    /// (`None` defaults to `min(4, D)`).
    Kpls { max_components: Option<usize> },
}

/// Trained kernel parameters of either family. The variance field is the
/// process variance in the model's standardized output space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum KernelParams {
    Se(SeKernelParams),
    Kpls(KplsParams),
}

/// Hyperparameter training configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Multi-start count for the bounded log-ML search.
    pub n_starts: usize,
    /// How many of the best starts get simplex refinement.
    pub refine_top: usize,
    /// Function-evaluation budget per simplex refinement.
    pub max_refine_evals: usize,
    /// Bounds of the search in log space (applies to length scales and KPLS
    /// rates alike), over normalized inputs.
    pub log_scale_bounds: (f64, f64),
    /// Initial diagonal nugget, relative to the unit correlation diagonal.
    pub nugget: f64,
    /// Largest nugget tried when the correlation matrix fails to factor.
    pub nugget_max: f64,
    /// Seed for the multi-start draw.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            n_starts: 10,
            refine_top: 3,
            max_refine_evals: 220,
            log_scale_bounds: ((1e-2f64).ln(), (1e2f64).ln()),
            nugget: 1e-10,
            nugget_max: 1e-6,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<(), Error> {
        if self.n_starts == 0 {
            return Err(Error::InvalidInput("n_starts must be at least 1".into()));
        }
        if !(self.log_scale_bounds.0 < self.log_scale_bounds.1) {
            return Err(Error::InvalidInput("log_scale_bounds must be ordered".into()));
        }
        if self.nugget <= 0.0 || self.nugget_max < self.nugget {
            return Err(Error::InvalidInput("nugget ladder must satisfy 0 < nugget <= nugget_max".into()));
        }
        Ok(())
    }
}

/// Posterior mean and standard deviation at one point, in original output
/// units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    pub sd: f64,
}

/// Anything that predicts a mean and standard deviation at a point.
pub trait Surrogate: Send + Sync {
    fn predict(&self, x: &[f64]) -> Prediction;
}

/// Per-start diagnostics of one training call. Values are negated log
/// marginal likelihoods (lower is better) in standardized output space.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainingReport {
    pub start_neg_log_ml: Vec<f64>,
    pub final_neg_log_ml: f64,
}

/// A trained Gaussian process surrogate.
#[derive(Debug, Clone)]
pub struct GpModel {
    variables: Vec<VariableMeta>,
    output_name: String,
    kernel: CorrParams,
    sigma2: f64,
    beta: f64,
    nugget: f64,
    y_mean: f64,
    y_std: f64,
    x_train: Array2<f64>,
    y_train_std: Array1<f64>,
    alpha: Array1<f64>,
    chol: Cholesky,
    report: TrainingReport,
}

/// Correlation-part parameters (process variance held separately).
#[derive(Debug, Clone, PartialEq)]
enum CorrParams {
    Se { length_scales: Vec<f64> },
    Kpls { thetas: Vec<f64>, weights: Array2<f64> },
}

impl CorrParams {
    fn correlation(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            CorrParams::Se { length_scales } => se_correlation(a, b, length_scales),
            CorrParams::Kpls { thetas, weights } => kpls_correlation(a, b, thetas, weights),
        }
    }
}

impl GpModel {
    pub fn variables(&self) -> &[VariableMeta] {
        &self.variables
    }

    pub fn output_name(&self) -> &str {
        &self.output_name
    }

    pub fn dim(&self) -> usize {
        self.variables.len()
    }

    pub fn n_train(&self) -> usize {
        self.x_train.nrows()
    }

    /// Final nugget on the correlation diagonal.
    pub fn nugget(&self) -> f64 {
        self.nugget
    }

    /// Kernel parameters with the process variance of the standardized
    /// output space.
    pub fn kernel_params(&self) -> KernelParams {
        match &self.kernel {
            CorrParams::Se { length_scales } => KernelParams::Se(SeKernelParams {
                variance: self.sigma2,
                length_scales: length_scales.clone(),
            }),
            CorrParams::Kpls { thetas, weights } => KernelParams::Kpls(KplsParams {
                variance: self.sigma2,
                thetas: thetas.clone(),
                weights: weights.clone(),
            }),
        }
    }

    /// Process standard deviation in original output units; the predictive
    /// sd approaches this far away from all data.
    pub fn prior_sd(&self) -> f64 {
        self.y_std * self.sigma2.sqrt()
    }

    /// Mean bias in original output units; the predictive mean approaches
    /// this far away from all data.
    pub fn prior_mean(&self) -> f64 {
        self.y_mean + self.y_std * self.beta
    }

    pub fn training_report(&self) -> &TrainingReport {
        &self.report
    }

    fn normalize(&self, x: &[f64]) -> Vec<f64> {
        normalize_point(x, &self.variables)
    }

    /// Leave-one-out posterior at each training point, in original units,
    /// from the closed-form identities on the correlation inverse.
    pub(crate) fn loo_predictions(&self) -> Vec<Prediction> {
        let n = self.n_train();
        let rinv = self.chol.inverse();
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let d = rinv[[i, i]].max(1e-300);
            let resid = self.alpha[i] / d;
            let mean_std = self.y_train_std[i] - resid;
            let var_std = (self.sigma2 / d).max(0.0);
            out.push(Prediction {
                mean: self.y_mean + self.y_std * mean_std,
                sd: self.y_std * var_std.sqrt(),
            });
        }
        out
    }

    /// Serializes the model to self-describing JSON; see [`GpModelDump`].
    pub fn to_json(&self) -> String {
        let dump = GpModelDump {
            kernel: match &self.kernel {
                CorrParams::Se { .. } => "se".into(),
                CorrParams::Kpls { .. } => "kpls".into(),
            },
            variables: self.variables.clone(),
            output_name: self.output_name.clone(),
            length_scales: match &self.kernel {
                CorrParams::Se { length_scales } => Some(length_scales.clone()),
                _ => None,
            },
            thetas: match &self.kernel {
                CorrParams::Kpls { thetas, .. } => Some(thetas.clone()),
                _ => None,
            },
            weights: match &self.kernel {
                CorrParams::Kpls { weights, .. } => {
                    Some(weights.outer_iter().map(|r| r.to_vec()).collect())
                }
                _ => None,
            },
            process_variance: self.sigma2,
            mean_bias: self.beta,
            nugget: self.nugget,
            y_mean: self.y_mean,
            y_std: self.y_std,
            x_train_normalized: self.x_train.outer_iter().map(|r| r.to_vec()).collect(),
            y_train_standardized: self.y_train_std.to_vec(),
        };
        serde_json::to_string_pretty(&dump).expect("dump is serializable")
    }

    /// Rebuilds a model from [`GpModel::to_json`] output. The Cholesky
    /// factor is refactored from the stored training data, so predictions
    /// match the dumped model exactly.
    pub fn from_json(text: &str) -> Result<GpModel, Error> {
        let dump: GpModelDump = serde_json::from_str(text)?;
        let n = dump.x_train_normalized.len();
        let d = dump.variables.len();
        if n == 0 || dump.y_train_standardized.len() != n {
            return Err(Error::Serde("dump has inconsistent training data".into()));
        }
        let mut x = Array2::<f64>::zeros((n, d));
        for (i, row) in dump.x_train_normalized.iter().enumerate() {
            if row.len() != d {
                return Err(Error::Serde("dump row width mismatch".into()));
            }
            for j in 0..d {
                x[[i, j]] = row[j];
            }
        }
        let kernel = match dump.kernel.as_str() {
            "se" => CorrParams::Se {
                length_scales: dump
                    .length_scales
                    .ok_or_else(|| Error::Serde("se dump missing length_scales".into()))?,
            },
            "kpls" => {
                let thetas =
                    dump.thetas.ok_or_else(|| Error::Serde("kpls dump missing thetas".into()))?;
                let rows =
                    dump.weights.ok_or_else(|| Error::Serde("kpls dump missing weights".into()))?;
                let h = rows.len();
                let mut weights = Array2::<f64>::zeros((h, d));
                for (l, row) in rows.iter().enumerate() {
                    if row.len() != d {
                        return Err(Error::Serde("kpls weight row width mismatch".into()));
                    }
                    for j in 0..d {
                        weights[[l, j]] = row[j];
                    }
                }
                CorrParams::Kpls { thetas, weights }
            }
            other => return Err(Error::Serde(format!("unknown kernel kind '{other}'"))),
        };
        let y = Array1::from_vec(dump.y_train_standardized);
        let (chol, _) = factor_with_nugget(&corr_matrix(&x, &kernel), dump.nugget, dump.nugget)
            .ok_or_else(|| Error::Training("dumped correlation matrix is not positive definite".into()))?;
        // Same operation order as training (two solves, then the linear
        // combination), so the rebuilt alpha matches bit for bit.
        let ones = Array1::from_elem(n, 1.0);
        let u = chol.solve(y.view());
        let v = chol.solve(ones.view());
        let alpha = &u - &(v * dump.mean_bias);
        Ok(GpModel {
            variables: dump.variables,
            output_name: dump.output_name,
            kernel,
            sigma2: dump.process_variance,
            beta: dump.mean_bias,
            nugget: dump.nugget,
            y_mean: dump.y_mean,
            y_std: dump.y_std,
            x_train: x,
            y_train_std: y,
            alpha,
            chol,
            report: TrainingReport { start_neg_log_ml: vec![], final_neg_log_ml: f64::NAN },
        })
    }
}

impl Surrogate for GpModel {
    fn predict(&self, x: &[f64]) -> Prediction {
        assert_eq!(x.len(), self.dim(), "query point has wrong dimension");
        let xn = self.normalize(x);
        let n = self.n_train();
        let mut r = Array1::<f64>::zeros(n);
        for i in 0..n {
            let row: Vec<f64> = self.x_train.row(i).to_vec();
            r[i] = self.kernel.correlation(&xn, &row);
        }
        let mean_std = self.beta + r.dot(&self.alpha);
        let w = self.chol.solve(r.view());
        let var_std = self.sigma2 * (1.0 - r.dot(&w));
        Prediction {
            mean: self.y_mean + self.y_std * mean_std,
            sd: self.y_std * var_std.max(0.0).sqrt(),
        }
    }
}

/// On-disk form of a trained model: kernel kind and hyperparameters,
/// normalization constants, and the (normalized) training data needed to
/// rebuild the factorization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GpModelDump {
    pub kernel: String,
    pub variables: Vec<VariableMeta>,
    pub output_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length_scales: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thetas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<Vec<f64>>>,
    pub process_variance: f64,
    pub mean_bias: f64,
    pub nugget: f64,
    pub y_mean: f64,
    pub y_std: f64,
    pub x_train_normalized: Vec<Vec<f64>>,
    pub y_train_standardized: Vec<f64>,
}

/// Log marginal likelihood
/// `-1/2 (N ln(2 pi s2) + ln det K + (Y - 1 b)^T K^-1 (Y - 1 b) / s2)`
/// of the data under the given kernel parameters and mean bias, computed via
/// the Cholesky factor of the correlation matrix (plus the escalating
/// nugget). Operates on the data exactly as given: no normalization is
/// applied, so parameters and bias must be in data units.
pub fn log_marginal_likelihood(
    doe: DoeColumn<'_>,
    params: &KernelParams,
    mean_bias: f64,
) -> Result<f64, Error> {
    let n = doe.n();
    if n == 0 {
        return Err(Error::InvalidInput("log-ML needs at least one point".into()));
    }
    let (sigma2, corr) = validate_params(params, doe.dim())?;
    let x = doe.inputs.to_owned();
    let r = corr_matrix(&x, &corr);
    let (chol, _) = factor_with_nugget(&r, 1e-10, 1e-6).ok_or_else(|| {
        Error::Training("correlation matrix not positive definite after maximum nugget escalation".into())
    })?;
    let y = doe.outputs.to_owned();
    let resid = y.map(|v| v - mean_bias);
    let alpha = chol.solve(resid.view());
    let quad = resid.dot(&alpha);
    Ok(-0.5
        * (n as f64 * (2.0 * std::f64::consts::PI * sigma2).ln()
            + chol.log_det()
            + quad / sigma2))
}

fn validate_params(params: &KernelParams, d: usize) -> Result<(f64, CorrParams), Error> {
    match params {
        KernelParams::Se(p) => {
            if p.variance <= 0.0
                || !p.variance.is_finite()
                || p.length_scales.len() != d
                || p.length_scales.iter().any(|l| *l <= 0.0 || !l.is_finite())
            {
                return Err(Error::InvalidInput(
                    "SE kernel needs positive variance and D positive length scales".into(),
                ));
            }
            Ok((p.variance, CorrParams::Se { length_scales: p.length_scales.clone() }))
        }
        KernelParams::Kpls(p) => {
            if p.variance <= 0.0
                || !p.variance.is_finite()
                || p.thetas.is_empty()
                || p.thetas.len() != p.weights.nrows()
                || p.weights.ncols() != d
                || p.thetas.iter().any(|t| *t <= 0.0 || !t.is_finite())
            {
                return Err(Error::InvalidInput(
                    "KPLS kernel needs positive variance, positive rates and an h x D weight matrix".into(),
                ));
            }
            Ok((
                p.variance,
                CorrParams::Kpls { thetas: p.thetas.clone(), weights: p.weights.clone() },
            ))
        }
    }
}

/// Trains a GP on one DOE column. See [`TrainConfig`] for the search
/// protocol; the result is deterministic for a fixed seed.
pub fn train_gp(doe: DoeColumn<'_>, kind: KernelKind, config: &TrainConfig) -> Result<GpModel, Error> {
    let mask = vec![false; doe.dim()];
    train_gp_masked(doe, kind, config, &mask)
}

/// As [`train_gp`], with masked variables excluded from KPLS weights (their
/// weight columns are exactly zero). SE training ignores the mask.
pub(crate) fn train_gp_masked(
    doe: DoeColumn<'_>,
    kind: KernelKind,
    config: &TrainConfig,
    mask: &[bool],
) -> Result<GpModel, Error> {
    config.validate()?;
    if doe.n() == 0 {
        return Err(Error::InvalidInput("training needs at least one point".into()));
    }
    if mask.len() != doe.dim() {
        return Err(Error::InvalidInput("mask length must equal dimension".into()));
    }
    let std = standardize(&doe);
    match kind {
        KernelKind::Se => {
            let d = doe.dim();
            let core = train_core(
                &std,
                d,
                |logp| CorrParams::Se { length_scales: logp.iter().map(|v| v.exp()).collect() },
                config,
                config.seed,
            )?;
            Ok(assemble(&doe, std, core))
        }
        KernelKind::Kpls { max_components } => {
            if doe.n() < 3 {
                return Err(Error::InvalidInput("KPLS training needs at least 3 points".into()));
            }
            let active = mask.iter().filter(|m| !**m).count();
            if active == 0 {
                return Err(Error::InvalidInput("KPLS training needs at least one unmasked variable".into()));
            }
            let cap = max_components
                .unwrap_or_else(|| 4usize.min(doe.dim()))
                .min(active)
                .min(doe.n() - 1)
                .max(1);
            let mut best: Option<(f64, usize, TrainedCore)> = None;
            for h in 1..=cap {
                let pw = pls_weight_matrix(std.xn.view(), std.ys.view(), h, mask);
                let h_actual = pw.weights.nrows();
                let weights = pw.weights;
                let core = train_core(
                    &std,
                    h_actual,
                    |logp| CorrParams::Kpls {
                        thetas: logp.iter().map(|v| v.exp()).collect(),
                        weights: weights.clone(),
                    },
                    config,
                    seed::derive_seed(config.seed, &[seed::tag::TRAIN, h as u64]),
                )?;
                let loo = loo_mse(&core);
                let better = match &best {
                    None => true,
                    Some((best_loo, _, _)) => loo < *best_loo,
                };
                if better {
                    best = Some((loo, h_actual, core));
                }
                if h_actual < h || pw.degenerate {
                    break;
                }
            }
            let (_, _, core) = best.expect("at least one component count is evaluated");
            Ok(assemble(&doe, std, core))
        }
    }
}

/// PLS weight extraction plus component-count selection by leave-one-out
/// error of the trained GP, using default training settings. Returns the
/// parameters of the selected model (weights, rates, variance).
pub fn fit_kpls_weights(doe: DoeColumn<'_>, max_components: usize) -> Result<KplsParams, Error> {
    if max_components == 0 {
        return Err(Error::InvalidInput("max_components must be at least 1".into()));
    }
    if doe.n() < 3 {
        return Err(Error::InvalidInput("KPLS weight fitting needs at least 3 points".into()));
    }
    let model = train_gp(
        doe,
        KernelKind::Kpls { max_components: Some(max_components) },
        &TrainConfig::default(),
    )?;
    match model.kernel_params() {
        KernelParams::Kpls(p) => Ok(p),
        KernelParams::Se(_) => unreachable!("trained with the KPLS kind"),
    }
}

struct Standardized {
    xn: Array2<f64>,
    ys: Array1<f64>,
    y_mean: f64,
    y_std: f64,
}

fn normalize_point(x: &[f64], variables: &[VariableMeta]) -> Vec<f64> {
    x.iter()
        .zip(variables)
        .map(|(v, meta)| (v - meta.lower) / (meta.upper - meta.lower))
        .collect()
}

fn standardize(doe: &DoeColumn<'_>) -> Standardized {
    let n = doe.n();
    let d = doe.dim();
    let mut xn = Array2::<f64>::zeros((n, d));
    for i in 0..n {
        for (j, meta) in doe.variables.iter().enumerate() {
            xn[[i, j]] = (doe.inputs[[i, j]] - meta.lower) / (meta.upper - meta.lower);
        }
    }
    let y_mean = doe.outputs.sum() / n as f64;
    let var = doe.outputs.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / n as f64;
    let y_std = var.sqrt().max(Y_STD_FLOOR);
    let ys = doe.outputs.map(|v| (v - y_mean) / y_std);
    Standardized { xn, ys, y_mean, y_std }
}

fn corr_matrix(x: &Array2<f64>, kernel: &CorrParams) -> Array2<f64> {
    let n = x.nrows();
    let mut r = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        r[[i, i]] = 1.0;
        let xi: Vec<f64> = x.row(i).to_vec();
        for j in 0..i {
            let xj: Vec<f64> = x.row(j).to_vec();
            let v = kernel.correlation(&xi, &xj);
            r[[i, j]] = v;
            r[[j, i]] = v;
        }
    }
    r
}

/// Adds an escalating nugget to the diagonal until the factorization
/// succeeds; `None` when even `nugget_max` fails.
fn factor_with_nugget(r: &Array2<f64>, nugget0: f64, nugget_max: f64) -> Option<(Cholesky, f64)> {
    let mut nugget = nugget0;
    loop {
        let mut rn = r.clone();
        for i in 0..rn.nrows() {
            rn[[i, i]] += nugget;
        }
        if let Some(ch) = Cholesky::new(&rn) {
            return Some((ch, nugget));
        }
        if nugget >= nugget_max {
            return None;
        }
        nugget = (nugget * 10.0).min(nugget_max);
    }
}

struct TrainedCore {
    kernel: CorrParams,
    beta: f64,
    sigma2: f64,
    nugget: f64,
    chol: Cholesky,
    alpha: Array1<f64>,
    report: TrainingReport,
}

struct FitEval {
    nll: f64,
    beta: f64,
    sigma2: f64,
    nugget: f64,
    chol: Cholesky,
    alpha: Array1<f64>,
}

/// Profiled negative log marginal likelihood: mean bias by generalized least
/// squares, process variance in closed form.
fn eval_fit(std: &Standardized, kernel: &CorrParams, config: &TrainConfig) -> Option<FitEval> {
    let n = std.xn.nrows();
    let r = corr_matrix(&std.xn, kernel);
    let (chol, nugget) = factor_with_nugget(&r, config.nugget, config.nugget_max)?;
    let ones = Array1::from_elem(n, 1.0);
    let u = chol.solve(std.ys.view());
    let v = chol.solve(ones.view());
    let denom = ones.dot(&v);
    if denom <= 0.0 || !denom.is_finite() {
        return None;
    }
    let beta = ones.dot(&u) / denom;
    let alpha = &u - &(v * beta);
    let resid = std.ys.map(|y| y - beta);
    let quad = resid.dot(&alpha).max(0.0);
    let sigma2 = (quad / n as f64).max(SIGMA2_FLOOR);
    let nll = 0.5
        * (n as f64 * (2.0 * std::f64::consts::PI * sigma2).ln()
            + chol.log_det()
            + quad / sigma2);
    if !nll.is_finite() {
        return None;
    }
    Some(FitEval { nll, beta, sigma2, nugget, chol, alpha })
}

/// Multi-start bounded search plus simplex refinement over `dim` log
/// parameters. Deterministic: start points come from a seeded stream, the
/// winner is the lowest profiled negative log-ML, ties resolved by the
/// lowest start index.
fn train_core(
    std: &Standardized,
    dim: usize,
    build: impl Fn(&[f64]) -> CorrParams,
    config: &TrainConfig,
    stream_seed: u64,
) -> Result<TrainedCore, Error> {
    let (lo, hi) = config.log_scale_bounds;
    let mut rng = seed::rng_for(stream_seed, &[seed::tag::TRAIN]);
    let mut starts: Vec<Vec<f64>> = Vec::with_capacity(config.n_starts);
    starts.push(vec![0.0f64.clamp(lo, hi); dim]);
    for _ in 1..config.n_starts {
        starts.push((0..dim).map(|_| lo + rng.random::<f64>() * (hi - lo)).collect());
    }

    let objective = |logp: &[f64]| match eval_fit(std, &build(logp), config) {
        Some(fit) => fit.nll,
        None => f64::INFINITY,
    };

    let start_values: Vec<f64> = starts.iter().map(|s| objective(s)).collect();
    let mut order: Vec<usize> = (0..starts.len()).collect();
    order.sort_by(|&a, &b| {
        start_values[a]
            .partial_cmp(&start_values[b])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });

    let lo_v = vec![lo; dim];
    let hi_v = vec![hi; dim];
    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    for &idx in order.iter().take(config.refine_top.max(1).min(starts.len())) {
        let (point, value) = if start_values[idx].is_finite() {
            nelder_mead(objective, &starts[idx], &lo_v, &hi_v, config.max_refine_evals, 1e-9)
        } else {
            (starts[idx].clone(), start_values[idx])
        };
        let better = match &best {
            None => true,
            Some((bv, bi, _)) => value < *bv || (value == *bv && idx < *bi),
        };
        if better {
            best = Some((value, idx, point));
        }
    }
    let (_, _, logp) = best.expect("at least one start is refined");
    let kernel = build(&logp);
    let fit = eval_fit(std, &kernel, config).ok_or_else(|| {
        Error::Training(format!(
            "all {} starts failed: correlation matrix not positive definite within the nugget ladder",
            config.n_starts
        ))
    })?;
    Ok(TrainedCore {
        kernel,
        beta: fit.beta,
        sigma2: fit.sigma2,
        nugget: fit.nugget,
        chol: fit.chol,
        alpha: fit.alpha,
        report: TrainingReport { start_neg_log_ml: start_values, final_neg_log_ml: fit.nll },
    })
}

fn loo_mse(core: &TrainedCore) -> f64 {
    let n = core.alpha.len();
    let rinv = core.chol.inverse();
    let mut acc = 0.0;
    for i in 0..n {
        let d = rinv[[i, i]].max(1e-300);
        let e = core.alpha[i] / d;
        acc += e * e;
    }
    acc / n as f64
}

fn assemble(doe: &DoeColumn<'_>, std: Standardized, core: TrainedCore) -> GpModel {
    GpModel {
        variables: doe.variables.to_vec(),
        output_name: doe.name.to_string(),
        kernel: core.kernel,
        sigma2: core.sigma2,
        beta: core.beta,
        nugget: core.nugget,
        y_mean: std.y_mean,
        y_std: std.y_std,
        x_train: std.xn,
        y_train_std: std.ys,
        alpha: core.alpha,
        chol: core.chol,
        report: core.report,
    }
}
