//! Design-of-experiments containers and sampling.
//!
//! A [`Doe`] stores evaluated designs: an input matrix plus one objective
//! column and any number of named constraint columns. Inputs always live
//! inside the bounds declared by their [`VariableMeta`], outputs are finite,
//! and the row count is shared by every column. Constraint values follow the
//! `c(x) <= 0` feasibility convention.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::seed;

/// One design variable: a name and closed bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableMeta {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

impl VariableMeta {
    pub fn new(name: impl Into<String>, lower: f64, upper: f64) -> Self {
        VariableMeta { name: name.into(), lower, upper }
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    fn validate(&self) -> Result<(), Error> {
        validate_identifier(&self.name)?;
        if !(self.lower < self.upper) || !self.lower.is_finite() || !self.upper.is_finite() {
            return Err(Error::InvalidInput(format!(
                "variable '{}' needs finite bounds with lower < upper (got [{}, {}])",
                self.name, self.lower, self.upper
            )));
        }
        Ok(())
    }
}

/// Engineering discipline a constraint belongs to; used as the second
/// matching tier when constraints of different problems are paired by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintCategory {
    Performance,
    VolumetricIntegration,
    Operational,
    Environmental,
    Other,
}

impl fmt::Display for ConstraintCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ConstraintCategory::Performance => "performance",
            ConstraintCategory::VolumetricIntegration => "volumetric_integration",
            ConstraintCategory::Operational => "operational",
            ConstraintCategory::Environmental => "environmental",
            ConstraintCategory::Other => "other",
        };
        f.write_str(s)
    }
}

/// Name and category of one inequality constraint `c(x) <= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintMeta {
    pub name: String,
    pub category: ConstraintCategory,
}

impl ConstraintMeta {
    pub fn new(name: impl Into<String>, category: ConstraintCategory) -> Self {
        ConstraintMeta { name: name.into(), category }
    }
}

type BlackboxFn = dyn Fn(&[f64]) -> Result<f64, Error> + Send + Sync;

/// Callable wrapper around one scalar output of a black-box problem.
///
/// `reentrant` declares whether concurrent calls are safe; bridges to a
/// single external process are not, analytic functions are.
#[derive(Clone)]
pub struct Blackbox {
    f: Arc<BlackboxFn>,
    pub reentrant: bool,
}

impl Blackbox {
    /// Wraps a thread-safe function that may be called concurrently.
    pub fn reentrant<F>(f: F) -> Self
    where
        F: Fn(&[f64]) -> Result<f64, Error> + Send + Sync + 'static,
    {
        Blackbox { f: Arc::new(f), reentrant: true }
    }

    /// Wraps a function whose calls must stay sequential.
    pub fn sequential<F>(f: F) -> Self
    where
        F: Fn(&[f64]) -> Result<f64, Error> + Send + Sync + 'static,
    {
        Blackbox { f: Arc::new(f), reentrant: false }
    }

    /// Convenience wrapper for an infallible analytic function.
    pub fn analytic<F>(f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Blackbox::reentrant(move |x| Ok(f(x)))
    }

    pub fn call(&self, x: &[f64]) -> Result<f64, Error> {
        let y = (self.f)(x)?;
        if !y.is_finite() {
            return Err(Error::Blackbox {
                row: None,
                message: format!("non-finite output {y}"),
            });
        }
        Ok(y)
    }
}

impl fmt::Debug for Blackbox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Blackbox").field("reentrant", &self.reentrant).finish()
    }
}

/// A full optimization problem: variables, objective and constraints.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub variables: Vec<VariableMeta>,
    pub objective: Blackbox,
    pub constraints: Vec<(ConstraintMeta, Blackbox)>,
}

impl ProblemSpec {
    pub fn new(
        name: impl Into<String>,
        variables: Vec<VariableMeta>,
        objective: Blackbox,
        constraints: Vec<(ConstraintMeta, Blackbox)>,
    ) -> Result<Self, Error> {
        let spec = ProblemSpec { name: name.into(), variables, objective, constraints };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<(), Error> {
        validate_variables(&self.variables)?;
        let mut seen = Vec::new();
        for (meta, _) in &self.constraints {
            validate_identifier(&meta.name)?;
            let lower = meta.name.to_ascii_lowercase();
            if seen.contains(&lower) {
                return Err(Error::InvalidInput(format!(
                    "duplicate constraint name '{}'",
                    meta.name
                )));
            }
            seen.push(lower);
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.variables.len()
    }

    pub fn constraint_metas(&self) -> Vec<ConstraintMeta> {
        self.constraints.iter().map(|(m, _)| m.clone()).collect()
    }

    /// Evaluates one point: objective first, then constraints in declared
    /// order. Bridged problems rely on this call order.
    pub fn evaluate_point(&self, x: &[f64]) -> Result<(f64, Vec<f64>), Error> {
        if x.len() != self.dim() {
            return Err(Error::InvalidInput(format!(
                "point has {} coordinates, problem '{}' has {} variables",
                x.len(),
                self.name,
                self.dim()
            )));
        }
        let objective = self.objective.call(x)?;
        let mut cs = Vec::with_capacity(self.constraints.len());
        for (_, bb) in &self.constraints {
            cs.push(bb.call(x)?);
        }
        Ok((objective, cs))
    }
}

/// An evaluated design of experiments.
#[derive(Debug, Clone, PartialEq)]
pub struct Doe {
    variables: Vec<VariableMeta>,
    inputs: Array2<f64>,
    objective: Array1<f64>,
    constraints: Vec<(ConstraintMeta, Array1<f64>)>,
}

impl Doe {
    pub fn new(
        variables: Vec<VariableMeta>,
        inputs: Array2<f64>,
        objective: Array1<f64>,
        constraints: Vec<(ConstraintMeta, Array1<f64>)>,
    ) -> Result<Self, Error> {
        validate_variables(&variables)?;
        let n = inputs.nrows();
        if n == 0 {
            return Err(Error::InvalidInput("a DOE needs at least one row".into()));
        }
        if inputs.ncols() != variables.len() {
            return Err(Error::InvalidInput(format!(
                "input matrix has {} columns for {} variables",
                inputs.ncols(),
                variables.len()
            )));
        }
        if objective.len() != n {
            return Err(Error::InvalidInput(format!(
                "objective column has {} rows, inputs have {n}",
                objective.len()
            )));
        }
        for (meta, col) in &constraints {
            if col.len() != n {
                return Err(Error::InvalidInput(format!(
                    "constraint '{}' has {} rows, inputs have {n}",
                    meta.name,
                    col.len()
                )));
            }
        }
        let doe = Doe { variables, inputs, objective, constraints };
        doe.validate_values()?;
        Ok(doe)
    }

    fn validate_values(&self) -> Result<(), Error> {
        for (i, row) in self.inputs.outer_iter().enumerate() {
            for (d, meta) in self.variables.iter().enumerate() {
                let x = row[d];
                if !x.is_finite() || x < meta.lower || x > meta.upper {
                    return Err(Error::InvalidInput(format!(
                        "row {i}: value {x} for variable '{}' outside bounds [{}, {}]",
                        meta.name, meta.lower, meta.upper
                    )));
                }
            }
        }
        let finite = |v: &Array1<f64>| v.iter().all(|y| y.is_finite());
        if !finite(&self.objective) || self.constraints.iter().any(|(_, c)| !finite(c)) {
            return Err(Error::InvalidInput("DOE outputs must be finite".into()));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn dim(&self) -> usize {
        self.variables.len()
    }

    pub fn variables(&self) -> &[VariableMeta] {
        &self.variables
    }

    pub fn inputs(&self) -> ArrayView2<'_, f64> {
        self.inputs.view()
    }

    pub fn objective_values(&self) -> ArrayView1<'_, f64> {
        self.objective.view()
    }

    pub fn constraints(&self) -> &[(ConstraintMeta, Array1<f64>)] {
        &self.constraints
    }

    pub fn constraint_metas(&self) -> Vec<ConstraintMeta> {
        self.constraints.iter().map(|(m, _)| m.clone()).collect()
    }

    /// View of the objective column for surrogate training.
    pub fn objective_column(&self) -> DoeColumn<'_> {
        DoeColumn {
            variables: &self.variables,
            inputs: self.inputs.view(),
            outputs: self.objective.view(),
            name: "objective",
        }
    }

    /// View of constraint column `i` for surrogate training.
    pub fn constraint_column(&self, i: usize) -> DoeColumn<'_> {
        let (meta, col) = &self.constraints[i];
        DoeColumn {
            variables: &self.variables,
            inputs: self.inputs.view(),
            outputs: col.view(),
            name: &meta.name,
        }
    }

    /// Appends one evaluated point to every column.
    pub fn append_row(&mut self, x: &[f64], objective: f64, constraints: &[f64]) -> Result<(), Error> {
        if x.len() != self.dim() {
            return Err(Error::InvalidInput("appended row has wrong dimension".into()));
        }
        if constraints.len() != self.constraints.len() {
            return Err(Error::InvalidInput("appended row has wrong constraint count".into()));
        }
        for (d, meta) in self.variables.iter().enumerate() {
            if !x[d].is_finite() || x[d] < meta.lower || x[d] > meta.upper {
                return Err(Error::InvalidInput(format!(
                    "appended value {} for variable '{}' outside bounds",
                    x[d], meta.name
                )));
            }
        }
        if !objective.is_finite() || constraints.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("appended outputs must be finite".into()));
        }
        self.inputs.push_row(ArrayView1::from(x)).expect("row shape checked above");
        self.objective
            .append(ndarray::Axis(0), ArrayView1::from(&[objective]))
            .expect("objective is 1-d");
        for ((_, col), &v) in self.constraints.iter_mut().zip(constraints) {
            col.append(ndarray::Axis(0), ArrayView1::from(&[v])).expect("column is 1-d");
        }
        Ok(())
    }

    /// Writes the DOE as CSV with header `x_<name>,...,objective,c_<name>,...`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), Error> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> =
            self.variables.iter().map(|v| format!("x_{}", v.name)).collect();
        header.push("objective".into());
        header.extend(self.constraints.iter().map(|(m, _)| format!("c_{}", m.name)));
        w.write_record(&header)?;
        for i in 0..self.n() {
            let mut rec: Vec<String> =
                self.inputs.row(i).iter().map(|v| format!("{v}")).collect();
            rec.push(format!("{}", self.objective[i]));
            rec.extend(self.constraints.iter().map(|(_, c)| format!("{}", c[i])));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::Serde(e.to_string()))?;
        Ok(())
    }

    pub fn write_csv_path(&self, path: impl AsRef<Path>) -> Result<(), Error> {
        let f = std::fs::File::create(path).map_err(|e| Error::Serde(e.to_string()))?;
        self.write_csv(f)
    }

    /// Reads a DOE written by [`Doe::write_csv`]. Column names must match
    /// `variables` and `constraints` exactly and in order; bounds and
    /// categories are not stored in the CSV, so the caller supplies them.
    pub fn read_csv<R: Read>(
        input: R,
        variables: Vec<VariableMeta>,
        constraints: Vec<ConstraintMeta>,
    ) -> Result<Doe, Error> {
        let mut r = csv::Reader::from_reader(input);
        let header: Vec<String> =
            r.headers()?.iter().map(|s| s.to_string()).collect();
        let mut expected: Vec<String> =
            variables.iter().map(|v| format!("x_{}", v.name)).collect();
        expected.push("objective".into());
        expected.extend(constraints.iter().map(|m| format!("c_{}", m.name)));
        if header != expected {
            return Err(Error::Serde(format!(
                "CSV header {header:?} does not match expected {expected:?}"
            )));
        }
        let d = variables.len();
        let m = constraints.len();
        let mut inputs = Vec::new();
        let mut objective = Vec::new();
        let mut cons: Vec<Vec<f64>> = vec![Vec::new(); m];
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            if rec.len() != d + 1 + m {
                return Err(Error::Serde(format!("row {i} has {} fields", rec.len())));
            }
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|_| Error::Serde(format!("row {i}: bad number '{s}'")))
            };
            for j in 0..d {
                inputs.push(parse(&rec[j])?);
            }
            objective.push(parse(&rec[d])?);
            for j in 0..m {
                cons[j].push(parse(&rec[d + 1 + j])?);
            }
        }
        let n = objective.len();
        let inputs = Array2::from_shape_vec((n, d), inputs)
            .map_err(|e| Error::Serde(e.to_string()))?;
        Doe::new(
            variables,
            inputs,
            Array1::from_vec(objective),
            constraints.into_iter().zip(cons.into_iter().map(Array1::from_vec)).collect(),
        )
    }

    pub fn read_csv_path(
        path: impl AsRef<Path>,
        variables: Vec<VariableMeta>,
        constraints: Vec<ConstraintMeta>,
    ) -> Result<Doe, Error> {
        let f = std::fs::File::open(path).map_err(|e| Error::Serde(e.to_string()))?;
        Doe::read_csv(f, variables, constraints)
    }
}

/// Borrowed view of one output column of a [`Doe`] with its inputs.
#[derive(Debug, Clone, Copy)]
pub struct DoeColumn<'a> {
    pub variables: &'a [VariableMeta],
    pub inputs: ArrayView2<'a, f64>,
    pub outputs: ArrayView1<'a, f64>,
    pub name: &'a str,
}

impl DoeColumn<'_> {
    pub fn n(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn dim(&self) -> usize {
        self.variables.len()
    }
}

/// Latin hypercube sample of `count` points: per dimension, each of the
/// `count` equal-width strata of the range receives exactly one point,
/// jittered uniformly inside its stratum. Deterministic per seed.
pub fn lhs_sample(variables: &[VariableMeta], count: usize, seed: u64) -> Result<Array2<f64>, Error> {
    validate_variables(variables)?;
    if count == 0 {
        return Err(Error::InvalidInput("LHS sample count must be at least 1".into()));
    }
    let mut rng = seed::rng_for(seed, &[seed::tag::INITIAL_DOE]);
    let d = variables.len();
    let mut out = Array2::<f64>::zeros((count, d));
    let mut strata: Vec<usize> = (0..count).collect();
    for (j, meta) in variables.iter().enumerate() {
        strata.shuffle(&mut rng);
        let width = meta.upper - meta.lower;
        for i in 0..count {
            let u: f64 = rng.random();
            out[[i, j]] = meta.lower + (strata[i] as f64 + u) / count as f64 * width;
        }
    }
    Ok(out)
}

/// Uniform random sample of `count` points inside the bounds.
pub fn uniform_sample(
    variables: &[VariableMeta],
    count: usize,
    seed: u64,
) -> Result<Array2<f64>, Error> {
    validate_variables(variables)?;
    if count == 0 {
        return Err(Error::InvalidInput("sample count must be at least 1".into()));
    }
    let mut rng = seed::rng_for(seed, &[seed::tag::INITIAL_DOE]);
    let d = variables.len();
    let mut out = Array2::<f64>::zeros((count, d));
    for i in 0..count {
        for (j, meta) in variables.iter().enumerate() {
            let u: f64 = rng.random();
            out[[i, j]] = meta.lower + u * (meta.upper - meta.lower);
        }
    }
    Ok(out)
}

/// Evaluates every row of `inputs` through the problem's black boxes, in row
/// order. A failing evaluation aborts with the failing row index.
pub fn evaluate_doe(problem: &ProblemSpec, inputs: &Array2<f64>) -> Result<Doe, Error> {
    if inputs.nrows() == 0 {
        return Err(Error::InvalidInput("cannot evaluate an empty input matrix".into()));
    }
    let n = inputs.nrows();
    let mut objective = Array1::<f64>::zeros(n);
    let mut cons: Vec<Array1<f64>> =
        vec![Array1::zeros(n); problem.constraints.len()];
    for i in 0..n {
        let row: Vec<f64> = inputs.row(i).to_vec();
        let (obj, cs) = problem.evaluate_point(&row).map_err(|e| match e {
            Error::Blackbox { message, .. } => Error::Blackbox { row: Some(i), message },
            other => other,
        })?;
        objective[i] = obj;
        for (j, v) in cs.into_iter().enumerate() {
            cons[j][i] = v;
        }
    }
    Doe::new(
        problem.variables.clone(),
        inputs.clone(),
        objective,
        problem
            .constraints
            .iter()
            .map(|(m, _)| m.clone())
            .zip(cons)
            .collect(),
    )
}

fn validate_identifier(name: &str) -> Result<(), Error> {
    let ok = !name.is_empty()
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !name.chars().next().unwrap().is_ascii_digit();
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "name '{name}' must be a non-empty identifier (letters, digits, underscores)"
        )))
    }
}

fn validate_variables(variables: &[VariableMeta]) -> Result<(), Error> {
    if variables.is_empty() {
        return Err(Error::InvalidInput("at least one variable is required".into()));
    }
    let mut seen = Vec::new();
    for v in variables {
        v.validate()?;
        let lower = v.name.to_ascii_lowercase();
        if seen.contains(&lower) {
            return Err(Error::InvalidInput(format!("duplicate variable name '{}'", v.name)));
        }
        seen.push(lower);
    }
    Ok(())
}
