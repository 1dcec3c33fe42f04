//! The outer optimization loops.
//!
//! [`run_vbo`] is a plain constrained EGO loop: per iteration it trains SE
//! GPs for the objective and every constraint, maximizes the constrained
//! expected improvement, evaluates the true problem at the winner and grows
//! the DOE. [`run_tlbo`] replaces the per-iteration surrogates with transfer
//! ensembles built from source data (aligned across heterogeneous design
//! spaces), optionally falling back to plain GPs every k-th iteration.
//!
//! Seeds are derived per purpose and iteration rather than drawn from one
//! stream, so structurally equivalent runs coincide: TLBO with no usable
//! sources, or with `alternation_interval = 1`, reproduces the VBO candidate
//! sequence bit for bit under the same seed.

use std::collections::HashMap;
use std::io::Write as IoWrite;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::acquisition::{maximize_constrained, AcquisitionConfig};
use crate::doe::{Doe, DoeColumn, ProblemSpec, VariableMeta};
use crate::error::Error;
use crate::gp::{train_gp, GpModel, KernelKind, Surrogate, TrainConfig};
use crate::heterogeneity::{align_source_doe, build_masked_source_gp, match_constraints};
use crate::seed::{self, tag};
use crate::transfer::{
    fit_transfer, score_and_weight, CriteriaConfig, CriteriaRole, EnsembleSurrogate,
    SourceDiagnostic, SourceModel,
};

pub use crate::transfer::VariancePolicy;

/// Which outer loop a configuration drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OptimizerMode {
    #[serde(rename = "VBO")]
    Vbo,
    #[serde(rename = "TLBO")]
    Tlbo,
}

/// Settings shared by both loops.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// Black-box evaluations beyond the initial DOE.
    pub max_iter: usize,
    pub mode: OptimizerMode,
    /// Every k-th iteration of a TLBO run uses plain target GPs instead of
    /// transfer ensembles. TLBO only.
    pub alternation_interval: Option<usize>,
    pub variance_policy: VariancePolicy,
    pub seed: u64,
    pub criteria: CriteriaConfig,
    pub acquisition: AcquisitionConfig,
    pub train: TrainConfig,
    /// Stop refitting source adjustments and probabilities after this
    /// iteration; the last scored values are reused. TLBO only.
    pub freeze_probabilities_after: Option<usize>,
}

impl OptimizerConfig {
    pub fn vbo(max_iter: usize, seed: u64) -> Self {
        OptimizerConfig {
            max_iter,
            mode: OptimizerMode::Vbo,
            alternation_interval: None,
            variance_policy: VariancePolicy::TargetVariance,
            seed,
            criteria: CriteriaConfig::default(),
            acquisition: AcquisitionConfig::default(),
            train: TrainConfig::default(),
            freeze_probabilities_after: None,
        }
    }

    pub fn tlbo(max_iter: usize, seed: u64) -> Self {
        OptimizerConfig { mode: OptimizerMode::Tlbo, ..OptimizerConfig::vbo(max_iter, seed) }
    }

    fn validate(&self, expected_mode: OptimizerMode) -> Result<(), Error> {
        if self.mode != expected_mode {
            return Err(Error::InvalidInput(format!(
                "config mode {:?} does not match the entry point",
                self.mode
            )));
        }
        if self.mode == OptimizerMode::Vbo {
            if self.alternation_interval.is_some() {
                return Err(Error::InvalidInput(
                    "alternation_interval is only valid in TLBO mode".into(),
                ));
            }
            if self.freeze_probabilities_after.is_some() {
                return Err(Error::InvalidInput(
                    "freeze_probabilities_after is only valid in TLBO mode".into(),
                ));
            }
        }
        if self.alternation_interval == Some(0) {
            return Err(Error::InvalidInput("alternation_interval must be at least 1".into()));
        }
        Ok(())
    }
}

/// One evaluated point of a run. Initial-DOE rows carry iteration 0.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub x: Vec<f64>,
    pub objective: f64,
    pub constraints: Vec<f64>,
    pub feasible: bool,
    pub best_feasible_so_far: Option<f64>,
    /// Measured seconds since the run started; excluded from determinism
    /// guarantees and from the CSV serialization.
    pub wall_time_seconds: f64,
    /// Objective-ensemble probabilities of the transfer iteration that
    /// produced this point; absent for initial rows and plain-GP steps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_probabilities: Option<Vec<f64>>,
}

/// Ensemble diagnostics of one transfer iteration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationDiagnostics {
    pub iter: usize,
    /// True when alternation made this a plain-GP step (no ensembles).
    pub vbo_step: bool,
    pub objective: Vec<SourceDiagnostic>,
    pub constraints: Vec<(String, Vec<SourceDiagnostic>)>,
}

/// Complete record of one optimization run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunHistory {
    pub variables: Vec<VariableMeta>,
    pub constraint_names: Vec<String>,
    pub records: Vec<IterationRecord>,
    /// Per-iteration ensemble diagnostics; empty for VBO runs.
    pub diagnostics: Vec<IterationDiagnostics>,
}

impl RunHistory {
    pub fn n_evaluations(&self) -> usize {
        self.records.len()
    }

    /// Serializes the run as `iter,best_feasible,objective,feasible,wall_time`.
    ///
    /// The wall_time column is a deterministic synthetic cost, the running
    /// evaluation count times `cost_per_eval`, so rewriting the same run
    /// yields identical bytes; measured times stay in
    /// [`IterationRecord::wall_time_seconds`].
    pub fn to_csv_string(&self, cost_per_eval: f64) -> String {
        let mut out = String::from("iter,best_feasible,objective,feasible,wall_time\n");
        for (i, r) in self.records.iter().enumerate() {
            let best = r.best_feasible_so_far.map(|v| format!("{v}")).unwrap_or_default();
            let wall = (i + 1) as f64 * cost_per_eval;
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.iter, best, r.objective, r.feasible, wall
            ));
        }
        out
    }

    pub fn write_csv_path(&self, path: impl AsRef<Path>, cost_per_eval: f64) -> Result<(), Error> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::Serde(e.to_string()))?;
        f.write_all(self.to_csv_string(cost_per_eval).as_bytes())
            .map_err(|e| Error::Serde(e.to_string()))
    }

    /// JSON sidecar with the per-iteration, per-source ensemble diagnostics.
    pub fn diagnostics_json(&self) -> String {
        serde_json::to_string_pretty(&self.diagnostics).expect("diagnostics are serializable")
    }
}

/// Scans a history for the feasible point with the lowest objective.
pub fn best_feasible(history: &RunHistory) -> Option<(Vec<f64>, f64)> {
    let mut best: Option<(&IterationRecord, f64)> = None;
    for r in &history.records {
        if r.feasible && best.as_ref().map_or(true, |(_, b)| r.objective < *b) {
            best = Some((r, r.objective));
        }
    }
    best.map(|(r, v)| (r.x.clone(), v))
}

struct LoopState {
    doe: Doe,
    history: RunHistory,
    best: Option<f64>,
    started: Instant,
}

impl LoopState {
    fn new(spec: &ProblemSpec, initial: &Doe) -> Result<LoopState, Error> {
        if initial.variables() != spec.variables.as_slice() {
            return Err(Error::InvalidInput(
                "initial DOE variables do not match the problem".into(),
            ));
        }
        if initial.constraint_metas() != spec.constraint_metas() {
            return Err(Error::InvalidInput(
                "initial DOE constraints do not match the problem".into(),
            ));
        }
        let mut state = LoopState {
            doe: initial.clone(),
            history: RunHistory {
                variables: spec.variables.clone(),
                constraint_names: spec.constraint_metas().iter().map(|m| m.name.clone()).collect(),
                records: Vec::new(),
                diagnostics: Vec::new(),
            },
            best: None,
            started: Instant::now(),
        };
        for i in 0..initial.n() {
            let x = initial.inputs().row(i).to_vec();
            let objective = initial.objective_values()[i];
            let constraints: Vec<f64> =
                initial.constraints().iter().map(|(_, c)| c[i]).collect();
            state.record(0, x, objective, constraints, None);
        }
        Ok(state)
    }

    fn record(
        &mut self,
        iter: usize,
        x: Vec<f64>,
        objective: f64,
        constraints: Vec<f64>,
        source_probabilities: Option<Vec<f64>>,
    ) {
        let feasible = constraints.iter().all(|c| *c <= 0.0);
        if feasible && self.best.map_or(true, |b| objective < b) {
            self.best = Some(objective);
        }
        self.history.records.push(IterationRecord {
            iter,
            x,
            objective,
            constraints,
            feasible,
            best_feasible_so_far: self.best,
            wall_time_seconds: self.started.elapsed().as_secs_f64(),
            source_probabilities,
        });
    }

    /// Best feasible objective observed so far, or the best observed
    /// objective while nothing is feasible yet (the acquisition incumbent).
    fn incumbent(&self) -> f64 {
        self.best.unwrap_or_else(|| {
            self.doe
                .objective_values()
                .iter()
                .fold(f64::INFINITY, |acc, v| acc.min(*v))
        })
    }

    /// Runs the acquisition, evaluates the problem (one resampled retry on
    /// black-box failure), and appends the outcome.
    fn step(
        &mut self,
        spec: &ProblemSpec,
        objective: &dyn Surrogate,
        constraints: &[&dyn Surrogate],
        iter: usize,
        config: &OptimizerConfig,
        source_probabilities: Option<Vec<f64>>,
    ) -> Result<(), Error> {
        let y_min = self.incumbent();
        let x = maximize_constrained(
            objective,
            constraints,
            &spec.variables,
            y_min,
            &config.acquisition,
            seed::derive_seed(config.seed, &[tag::ACQUISITION, iter as u64]),
        );
        let (x, obj, cons) = match spec.evaluate_point(&x) {
            Ok((o, c)) => (x, o, c),
            Err(first) => {
                log::warn!("iteration {iter}: black-box failure ({first}); retrying with a resampled candidate");
                let retry = maximize_constrained(
                    objective,
                    constraints,
                    &spec.variables,
                    y_min,
                    &config.acquisition,
                    seed::derive_seed(config.seed, &[tag::ACQUISITION_RETRY, iter as u64]),
                );
                match spec.evaluate_point(&retry) {
                    Ok((o, c)) => (retry, o, c),
                    Err(second) => {
                        return Err(Error::Blackbox {
                            row: None,
                            message: format!(
                                "iteration {iter} failed twice: {first}; retry: {second}"
                            ),
                        });
                    }
                }
            }
        };
        self.doe.append_row(&x, obj, &cons)?;
        self.record(iter, x, obj, cons, source_probabilities);
        Ok(())
    }
}

fn train_seed(config: &OptimizerConfig, iter: usize, model_idx: usize) -> TrainConfig {
    config
        .train
        .clone()
        .with_seed(seed::derive_seed(config.seed, &[tag::TRAIN, iter as u64, model_idx as u64]))
}

/// Constrained EGO on plain GP surrogates. Evaluates `config.max_iter`
/// points beyond the initial DOE and returns the full history.
pub fn run_vbo(spec: &ProblemSpec, initial: &Doe, config: &OptimizerConfig) -> Result<RunHistory, Error> {
    config.validate(OptimizerMode::Vbo)?;
    let mut state = LoopState::new(spec, initial)?;
    vbo_loop(spec, config, &mut state)?;
    Ok(state.history)
}

fn vbo_loop(spec: &ProblemSpec, config: &OptimizerConfig, state: &mut LoopState) -> Result<(), Error> {
    for iter in 1..=config.max_iter {
        let (objective, constraints) = train_plain_models(spec, config, state, iter)?;
        let refs: Vec<&dyn Surrogate> = constraints.iter().map(|m| m as &dyn Surrogate).collect();
        state.step(spec, &objective, &refs, iter, config, None)?;
    }
    Ok(())
}

fn train_plain_models(
    spec: &ProblemSpec,
    config: &OptimizerConfig,
    state: &LoopState,
    iter: usize,
) -> Result<(GpModel, Vec<GpModel>), Error> {
    let objective = train_gp(
        state.doe.objective_column(),
        KernelKind::Se,
        &train_seed(config, iter, 0),
    )?;
    let mut constraints = Vec::with_capacity(spec.constraints.len());
    for ci in 0..spec.constraints.len() {
        constraints.push(train_gp(
            state.doe.constraint_column(ci),
            KernelKind::Se,
            &train_seed(config, iter, 1 + ci),
        )?);
    }
    Ok((objective, constraints))
}

/// Pre-trained source surrogates for one model slot (the objective or one
/// target constraint).
struct SourcePool {
    /// (label, source GP) pairs surviving alignment and training.
    members: Vec<(String, Arc<GpModel>)>,
}

impl SourcePool {
    /// Refits adjustments and probabilities against the current target data
    /// and assembles the ensemble around a freshly trained target GP.
    fn ensemble(
        &self,
        target: DoeColumn<'_>,
        target_gp: Arc<GpModel>,
        config: &OptimizerConfig,
        role: CriteriaRole,
        frozen: Option<&Vec<SourceModel>>,
    ) -> Result<EnsembleSurrogate, Error> {
        if let Some(snapshot) = frozen {
            return Ok(EnsembleSurrogate::from_parts(
                snapshot.clone(),
                target_gp,
                config.variance_policy,
            ));
        }
        let mut sources: Vec<SourceModel> = self
            .members
            .iter()
            .map(|(label, gp)| {
                let mut s = SourceModel::new(label.clone(), gp.clone());
                let (alpha, beta) = fit_transfer(&s.gp, target);
                s.alpha = alpha;
                s.beta = beta;
                s
            })
            .collect();
        score_and_weight(&mut sources, target, &config.criteria, role)?;
        Ok(EnsembleSurrogate::from_parts(sources, target_gp, config.variance_policy))
    }
}

/// Transfer-learning EGO: source GPs are aligned and trained once up front,
/// then every iteration refits their affine adjustments and probabilities
/// and optimizes the acquisition on the resulting ensembles. With
/// `alternation_interval = k`, every k-th iteration falls back to plain
/// target GPs; with no usable source at all the whole run degenerates to
/// [`run_vbo`] behavior (identical candidates under the same seed).
pub fn run_tlbo(
    spec: &ProblemSpec,
    source_does: &[Doe],
    initial: &Doe,
    config: &OptimizerConfig,
) -> Result<RunHistory, Error> {
    config.validate(OptimizerMode::Tlbo)?;
    if source_does.is_empty() {
        return Err(Error::InvalidInput("TLBO needs at least one source DOE".into()));
    }
    let mut state = LoopState::new(spec, initial)?;

    // Alignment and one-time source training.
    let mut aligned: Vec<(usize, Doe, Vec<bool>)> = Vec::new();
    for (j, source) in source_does.iter().enumerate() {
        match align_source_doe(source, &spec.variables) {
            Ok((doe, mask)) => aligned.push((j, doe, mask)),
            Err(err) => log::warn!("dropping source {j}: {err}"),
        }
    }
    if aligned.is_empty() {
        log::warn!("no source aligned with the target; running plain BO");
        vbo_loop(spec, config, &mut state)?;
        return Ok(state.history);
    }

    let source_labels: Vec<String> =
        aligned.iter().map(|(j, _, _)| format!("source_{j}")).collect();

    let mut objective_pool = SourcePool { members: Vec::new() };
    for (slot, (j, doe, mask)) in aligned.iter().enumerate() {
        let mut col = doe.objective_column();
        col.name = &source_labels[slot];
        let cfg = config
            .train
            .clone()
            .with_seed(seed::derive_seed(config.seed, &[tag::SOURCE_DOE, *j as u64, 0]));
        match build_masked_source_gp(col, mask, &cfg) {
            Ok(gp) => objective_pool.members.push((source_labels[slot].clone(), Arc::new(gp))),
            Err(err) => log::warn!("dropping source {j} objective: {err}"),
        }
    }

    let aligned_does: Vec<Doe> = aligned.iter().map(|(_, d, _)| d.clone()).collect();
    let matches = match_constraints(&spec.constraint_metas(), &aligned_does);
    let mut trained_columns: HashMap<(usize, usize), Arc<GpModel>> = HashMap::new();
    let mut constraint_pools: Vec<SourcePool> = Vec::new();
    for m in &matches {
        let mut pool = SourcePool { members: Vec::new() };
        for &(slot, col_idx) in &m.matches {
            let (j, doe, mask) = &aligned[slot];
            let key = (slot, col_idx);
            let gp = match trained_columns.get(&key) {
                Some(gp) => Some(gp.clone()),
                None => {
                    let mut col = doe.constraint_column(col_idx);
                    col.name = &source_labels[slot];
                    let cfg = config.train.clone().with_seed(seed::derive_seed(
                        config.seed,
                        &[tag::SOURCE_DOE, *j as u64, 1 + col_idx as u64],
                    ));
                    match build_masked_source_gp(col, mask, &cfg) {
                        Ok(gp) => {
                            let gp = Arc::new(gp);
                            trained_columns.insert(key, gp.clone());
                            Some(gp)
                        }
                        Err(err) => {
                            log::warn!(
                                "dropping source {j} constraint column {col_idx}: {err}"
                            );
                            None
                        }
                    }
                }
            };
            if let Some(gp) = gp {
                let label =
                    format!("{}:{}", source_labels[slot], aligned[slot].1.constraint_metas()[col_idx].name);
                pool.members.push((label, gp));
            }
        }
        constraint_pools.push(pool);
    }

    if objective_pool.members.is_empty() {
        log::warn!("all source objective surrogates failed to train; running plain BO");
        vbo_loop(spec, config, &mut state)?;
        return Ok(state.history);
    }

    // Snapshots of the last scored source models, for probability freezing.
    let mut frozen_objective: Option<Vec<SourceModel>> = None;
    let mut frozen_constraints: Vec<Option<Vec<SourceModel>>> =
        vec![None; constraint_pools.len()];

    for iter in 1..=config.max_iter {
        let vbo_step = config.alternation_interval.map_or(false, |k| iter % k == 0);
        if vbo_step {
            let (objective, constraints) = train_plain_models(spec, config, &state, iter)?;
            state.history.diagnostics.push(IterationDiagnostics {
                iter,
                vbo_step: true,
                objective: vec![],
                constraints: vec![],
            });
            let refs: Vec<&dyn Surrogate> =
                constraints.iter().map(|m| m as &dyn Surrogate).collect();
            state.step(spec, &objective, &refs, iter, config, None)?;
            continue;
        }

        let freeze = config
            .freeze_probabilities_after
            .map_or(false, |k| iter > k);

        let target_gp = Arc::new(train_gp(
            state.doe.objective_column(),
            KernelKind::Se,
            &train_seed(config, iter, 0),
        )?);
        let objective_ensemble = objective_pool.ensemble(
            state.doe.objective_column(),
            target_gp,
            config,
            CriteriaRole::Objective,
            if freeze { frozen_objective.as_ref() } else { None },
        )?;
        if !freeze {
            frozen_objective = Some(objective_ensemble.sources.clone());
        }

        let mut constraint_surrogates: Vec<Box<dyn Surrogate>> = Vec::new();
        let mut constraint_diags: Vec<(String, Vec<SourceDiagnostic>)> = Vec::new();
        for (ci, pool) in constraint_pools.iter().enumerate() {
            let name = state.history.constraint_names[ci].clone();
            let target_gp = Arc::new(train_gp(
                state.doe.constraint_column(ci),
                KernelKind::Se,
                &train_seed(config, iter, 1 + ci),
            )?);
            if pool.members.is_empty() {
                // No source constraint data matched: this output falls back
                // to its plain target GP.
                constraint_diags.push((name, vec![]));
                constraint_surrogates.push(Box::new(ArcSurrogate(target_gp)));
                continue;
            }
            let ensemble = pool.ensemble(
                state.doe.constraint_column(ci),
                target_gp,
                config,
                CriteriaRole::Constraint,
                if freeze { frozen_constraints[ci].as_ref() } else { None },
            )?;
            if !freeze {
                frozen_constraints[ci] = Some(ensemble.sources.clone());
            }
            constraint_diags.push((name, ensemble.diagnostics()));
            constraint_surrogates.push(Box::new(ensemble));
        }

        state.history.diagnostics.push(IterationDiagnostics {
            iter,
            vbo_step: false,
            objective: objective_ensemble.diagnostics(),
            constraints: constraint_diags,
        });
        let probabilities = objective_ensemble.probabilities();
        let refs: Vec<&dyn Surrogate> =
            constraint_surrogates.iter().map(|b| b.as_ref()).collect();
        state.step(spec, &objective_ensemble, &refs, iter, config, Some(probabilities))?;
    }
    Ok(state.history)
}

/// Newtype so a shared GP can stand in where a boxed surrogate is needed.
struct ArcSurrogate(Arc<GpModel>);

impl Surrogate for ArcSurrogate {
    fn predict(&self, x: &[f64]) -> crate::gp::Prediction {
        self.0.predict(x)
    }
}
