//! Executes an experiment: methods x runs, paired seeding, files on disk.

use std::path::Path;
use std::time::Instant;

use anyhow::Context;
use serde::{Deserialize, Serialize};
use xferbo::seed::{derive_seed, tag};
use xferbo::{benchmark_case, evaluate_doe, lhs_sample, run_tlbo, run_vbo, Doe, ProblemSpec, RunHistory};

use crate::config::{ExperimentConfig, Method};
use crate::external::{external_problem, load_source_does};
use crate::summary;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Failed(String),
}

/// One method x run cell of the experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunOutcome {
    pub method: Method,
    pub run: usize,
    pub seed: u64,
    pub status: RunStatus,
    /// Measured wall time. Informational only; every reproducible artifact
    /// uses the synthetic per-evaluation cost instead.
    pub wall_time_seconds: f64,
}

/// Written to `manifest.json` after all runs. Feeding the manifest back to
/// `run --config` reproduces the experiment because the config is embedded
/// verbatim under `config`.
#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ExperimentConfig,
    pub runs: Vec<RunOutcome>,
}

pub struct ExperimentReport {
    pub outcomes: Vec<RunOutcome>,
    pub any_failed: bool,
}

/// Runs every method x run cell, writes per-run histories, per-method
/// summaries, and the manifest into `config.out`.
///
/// Run `r` of every method shares one derived seed and one initial DOE, so
/// method comparisons are paired. `jobs == 0` uses one rayon worker per CPU.
pub fn run_experiment(config: &ExperimentConfig, jobs: usize) -> anyhow::Result<ExperimentReport> {
    config.validate()?;
    std::fs::create_dir_all(&config.out)
        .with_context(|| format!("cannot create output directory {}", config.out.display()))?;

    let tasks: Vec<(Method, usize)> = config
        .methods
        .iter()
        .flat_map(|&m| (0..config.runs).map(move |r| (m, r)))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .context("cannot build worker pool")?;
    let outcomes: Vec<RunOutcome> = pool.install(|| {
        use rayon::prelude::*;
        tasks.par_iter().map(|&(method, run)| execute_run(config, method, run)).collect()
    });

    for outcome in &outcomes {
        if let RunStatus::Failed(reason) = &outcome.status {
            log::warn!("{} run {} failed: {reason}", outcome.method, outcome.run);
        }
    }
    let any_failed = outcomes.iter().any(|o| matches!(o.status, RunStatus::Failed(_)));
    let completed = outcomes.len() - outcomes.iter().filter(|o| matches!(o.status, RunStatus::Failed(_))).count();
    if completed > 0 {
        // Summaries are recomputed from the files on disk, not from
        // in-memory state, so `summarize` on the same directory agrees
        // byte for byte.
        summary::summarize_dir(&config.out)?;
    } else {
        log::warn!("no run completed; skipping summaries");
    }

    let manifest = Manifest { config: config.clone(), runs: outcomes.clone() };
    let manifest_json =
        serde_json::to_string_pretty(&manifest).context("manifest serialization failed")?;
    let manifest_path = config.out.join("manifest.json");
    std::fs::write(&manifest_path, manifest_json + "\n")
        .with_context(|| format!("cannot write {}", manifest_path.display()))?;

    Ok(ExperimentReport { outcomes, any_failed })
}

pub fn history_file_name(method: Method, run: usize) -> String {
    format!("history_{}_{run:03}.csv", method.label())
}

fn execute_run(config: &ExperimentConfig, method: Method, run: usize) -> RunOutcome {
    // Paired across methods: the seed depends on the run index only.
    let run_seed = derive_seed(config.seed, &[tag::RUN, run as u64]);
    let start = Instant::now();
    let result = perform_run(config, method, run, run_seed);
    let wall_time_seconds = start.elapsed().as_secs_f64();
    let status = match result {
        Ok(()) => RunStatus::Completed,
        Err(e) => RunStatus::Failed(e.to_string()),
    };
    RunOutcome { method, run, seed: run_seed, status, wall_time_seconds }
}

fn perform_run(
    config: &ExperimentConfig,
    method: Method,
    run: usize,
    run_seed: u64,
) -> anyhow::Result<()> {
    let (spec, initial, sources) = build_problem(config, method, run)?;
    let opt_config = config.optimizer_config(method, run_seed);
    let history: RunHistory = if method.is_transfer() {
        run_tlbo(&spec, &sources, &initial, &opt_config)?
    } else {
        run_vbo(&spec, &initial, &opt_config)?
    };

    let csv_path = config.out.join(history_file_name(method, run));
    history
        .write_csv_path(&csv_path, config.cost_per_eval)
        .with_context(|| format!("cannot write {}", csv_path.display()))?;
    if !history.diagnostics.is_empty() {
        let path = config.out.join(format!("history_{}_{run:03}_diagnostics.json", method.label()));
        std::fs::write(&path, history.diagnostics_json() + "\n")
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(())
}

fn build_problem(
    config: &ExperimentConfig,
    method: Method,
    run: usize,
) -> anyhow::Result<(ProblemSpec, Doe, Vec<Doe>)> {
    if let Some(name) = &config.case {
        let case = benchmark_case(name)?;
        let initial = case.sample_initial(config.seed, run, config.initial_doe_size)?;
        let sources = if method.is_transfer() {
            case.sample_sources(config.seed, config.source_doe_size)?
        } else {
            Vec::new()
        };
        return Ok((case.target, initial, sources));
    }

    let desc = config.external.as_ref().expect("validated: case or external is set");
    let spec = external_problem(desc)?;
    let n = config.initial_doe_size.expect("validated for external problems");
    let inputs =
        lhs_sample(&desc.variables, n, derive_seed(config.seed, &[tag::INITIAL_DOE, run as u64]))?;
    let initial = evaluate_doe(&spec, &inputs).context("initial design evaluation failed")?;
    let sources = if method.is_transfer() { load_source_does(desc)? } else { Vec::new() };
    Ok((spec, initial, sources))
}

/// Reads a manifest written by [`run_experiment`].
pub fn read_manifest(path: &Path) -> anyhow::Result<Manifest> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("{} is not a manifest", path.display()))
}
