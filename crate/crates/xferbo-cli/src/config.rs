//! Experiment configuration: a single JSON document, with command-line
//! flags and the `XFERBO_SEED` environment variable layered on top.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use xferbo::transfer::VariancePolicy;
use xferbo::{benchmark_case, ConstraintMeta, OptimizerConfig, VariableMeta};

/// An optimization method selectable in an experiment. Transfer variants
/// differ only in the ensemble variance policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "VBO")]
    Vbo,
    #[serde(rename = "TLBO-ETL-TV")]
    TlboEtlTv,
    #[serde(rename = "TLBO-ETL-AV")]
    TlboEtlAv,
}

impl Method {
    pub fn all() -> [Method; 3] {
        [Method::Vbo, Method::TlboEtlTv, Method::TlboEtlAv]
    }

    pub fn label(&self) -> &'static str {
        match self {
            Method::Vbo => "VBO",
            Method::TlboEtlTv => "TLBO-ETL-TV",
            Method::TlboEtlAv => "TLBO-ETL-AV",
        }
    }

    pub fn is_transfer(&self) -> bool {
        !matches!(self, Method::Vbo)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::all()
            .into_iter()
            .find(|m| m.label() == s)
            .ok_or_else(|| {
                let known: Vec<_> = Method::all().iter().map(|m| m.label()).collect();
                format!("unknown method '{s}', expected one of {}", known.join(", "))
            })
    }
}

/// One prior data set usable by the transfer methods of an external
/// problem. `data` points at a CSV in the layout written by the library's
/// DOE serialization: `x_<var>` columns, `objective`, then `c_<name>`
/// columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceData {
    pub name: String,
    pub variables: Vec<VariableMeta>,
    #[serde(default)]
    pub constraints: Vec<ConstraintMeta>,
    pub data: PathBuf,
}

/// A user problem evaluated through a child process instead of a built-in
/// case. Each evaluation writes one JSON line `{"x":[...]}` to the child's
/// stdin and expects one reply line `{"objective":f,"constraints":[...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalProblem {
    pub name: String,
    /// Argv of the child process; element 0 is the executable.
    pub command: Vec<String>,
    pub variables: Vec<VariableMeta>,
    #[serde(default)]
    pub constraints: Vec<ConstraintMeta>,
    #[serde(default = "default_timeout")]
    pub timeout_seconds: f64,
    #[serde(default)]
    pub source_data: Vec<SourceData>,
}

fn default_timeout() -> f64 {
    30.0
}

fn default_out() -> PathBuf {
    PathBuf::from("results")
}

fn default_cost() -> f64 {
    1.0
}

/// Full description of one experiment: the problem, the methods to compare,
/// the repetition protocol, and where the outputs go.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Built-in case name; exactly one of `case` and `external` is set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub case: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub external: Option<ExternalProblem>,
    pub methods: Vec<Method>,
    pub runs: usize,
    pub iterations: usize,
    /// Base seed; per-run seeds are derived from it, identically across
    /// methods so that runs with the same index are paired.
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// Overrides the case default; required for external problems.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_doe_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_doe_size: Option<usize>,
    /// Synthetic seconds per evaluation for the wall-time column of the
    /// history and summary CSVs.
    #[serde(default = "default_cost")]
    pub cost_per_eval: f64,
    /// Passed through to the transfer methods; VBO ignores it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alternation_interval: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub freeze_probabilities_after: Option<usize>,
}

impl ExperimentConfig {
    /// Loads a configuration document. A manifest written by a previous run
    /// is accepted as well: its embedded `config` object is used, which
    /// makes any experiment reproducible by pointing `run` at its manifest.
    pub fn load(path: &Path) -> anyhow::Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .with_context(|| format!("config file {} is not valid JSON", path.display()))?;
        let config_value = match value.get("config") {
            Some(inner) => inner.clone(),
            None => value,
        };
        let config: ExperimentConfig = serde_json::from_value(config_value)
            .with_context(|| format!("config file {} does not match the schema", path.display()))?;
        Ok(config)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        match (&self.case, &self.external) {
            (Some(_), Some(_)) => bail!("config sets both 'case' and 'external'; pick one"),
            (None, None) => bail!("config must set either 'case' or 'external'"),
            (Some(name), None) => {
                benchmark_case(name).map_err(|e| anyhow::anyhow!("{e}"))?;
            }
            (None, Some(ext)) => self.validate_external(ext)?,
        }
        if self.methods.is_empty() {
            bail!("'methods' must list at least one method");
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].contains(m) {
                bail!("method {m} is listed twice");
            }
        }
        if self.runs == 0 {
            bail!("'runs' must be positive");
        }
        if self.iterations == 0 {
            bail!("'iterations' must be positive");
        }
        if self.initial_doe_size == Some(0) {
            bail!("'initial_doe_size' must be positive");
        }
        if self.source_doe_size == Some(0) {
            bail!("'source_doe_size' must be positive");
        }
        if !(self.cost_per_eval.is_finite() && self.cost_per_eval >= 0.0) {
            bail!("'cost_per_eval' must be a finite nonnegative number");
        }
        if self.alternation_interval == Some(0) {
            bail!("'alternation_interval' must be at least 1");
        }
        Ok(())
    }

    fn validate_external(&self, ext: &ExternalProblem) -> anyhow::Result<()> {
        if ext.command.is_empty() {
            bail!("external 'command' must not be empty");
        }
        if ext.variables.is_empty() {
            bail!("external 'variables' must not be empty");
        }
        if !(ext.timeout_seconds.is_finite() && ext.timeout_seconds > 0.0) {
            bail!("external 'timeout_seconds' must be positive");
        }
        if self.initial_doe_size.is_none() {
            bail!("external problems need an explicit 'initial_doe_size'");
        }
        if self.methods.iter().any(Method::is_transfer) && ext.source_data.is_empty() {
            bail!("transfer methods on an external problem need 'source_data'");
        }
        Ok(())
    }

    /// The per-run optimizer settings of one method. The seed is shared
    /// across methods for a given run index.
    pub fn optimizer_config(&self, method: Method, run_seed: u64) -> OptimizerConfig {
        match method {
            Method::Vbo => OptimizerConfig::vbo(self.iterations, run_seed),
            Method::TlboEtlTv | Method::TlboEtlAv => {
                let mut c = OptimizerConfig::tlbo(self.iterations, run_seed);
                c.variance_policy = match method {
                    Method::TlboEtlAv => VariancePolicy::AggregateVariance,
                    _ => VariancePolicy::TargetVariance,
                };
                c.alternation_interval = self.alternation_interval;
                c.freeze_probabilities_after = self.freeze_probabilities_after;
                c
            }
        }
    }
}
