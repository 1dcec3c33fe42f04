//! Built-in benchmark problems.
//!
//! Each case bundles a target problem with a set of related source problems
//! whose data feeds the transfer machinery, plus default experiment sizes.
//! Sources deliberately differ from their target (shifted coefficients,
//! different variable sets, renamed constraints) so that transfer has both
//! something to exploit and something to get wrong.

use std::f64::consts::PI;

use crate::doe::{
    evaluate_doe, lhs_sample, Blackbox, ConstraintCategory, ConstraintMeta, Doe, ProblemSpec,
    VariableMeta,
};
use crate::error::Error;
use crate::seed::{self, tag};

/// A source problem and the sample size its DOE gets by default.
#[derive(Debug, Clone)]
pub struct SourceSpec {
    pub problem: ProblemSpec,
    pub doe_size: usize,
}

/// Default experiment shape of a benchmark case.
#[derive(Debug, Clone, Copy)]
pub struct CaseDefaults {
    pub initial_doe_size: usize,
    pub iterations: usize,
    pub runs: usize,
}

/// A named target problem with its source suite.
#[derive(Debug, Clone)]
pub struct BenchmarkCase {
    pub name: &'static str,
    pub target: ProblemSpec,
    pub sources: Vec<SourceSpec>,
    pub defaults: CaseDefaults,
}

impl BenchmarkCase {
    /// Samples and evaluates the source DOEs. Source `j` draws its own
    /// stream from `seed`, so adding or reordering draws elsewhere in an
    /// experiment leaves the source data unchanged.
    pub fn sample_sources(&self, seed: u64, size_override: Option<usize>) -> Result<Vec<Doe>, Error> {
        self.sources
            .iter()
            .enumerate()
            .map(|(j, s)| {
                let n = size_override.unwrap_or(s.doe_size);
                let inputs = lhs_sample(
                    &s.problem.variables,
                    n,
                    seed::derive_seed(seed, &[tag::SOURCE_DOE, j as u64]),
                )?;
                evaluate_doe(&s.problem, &inputs)
            })
            .collect()
    }

    /// Samples and evaluates the initial target DOE for run `run_idx`.
    pub fn sample_initial(&self, seed: u64, run_idx: usize, size_override: Option<usize>) -> Result<Doe, Error> {
        let n = size_override.unwrap_or(self.defaults.initial_doe_size);
        let inputs = lhs_sample(
            &self.target.variables,
            n,
            seed::derive_seed(seed, &[tag::INITIAL_DOE, run_idx as u64]),
        )?;
        evaluate_doe(&self.target, &inputs)
    }
}

/// Names of all built-in cases.
pub fn all_cases() -> Vec<&'static str> {
    vec!["bohachevsky", "rosenbrock_mf22", "constrained_toy"]
}

/// Looks up a built-in case by name.
pub fn benchmark_case(name: &str) -> Result<BenchmarkCase, Error> {
    match name {
        "bohachevsky" => Ok(bohachevsky_case()),
        "rosenbrock_mf22" => Ok(rosenbrock_case()),
        "constrained_toy" => Ok(constrained_toy_case()),
        other => Err(Error::InvalidInput(format!(
            "unknown benchmark case '{other}' (available: {})",
            all_cases().join(", ")
        ))),
    }
}

fn xy_vars(lower: f64, upper: f64) -> Vec<VariableMeta> {
    vec![VariableMeta::new("x1", lower, upper), VariableMeta::new("x2", lower, upper)]
}

/// Two-dimensional Bohachevsky family on [-5, 5]^2. The target variant has
/// its global minimum 0.1 at the origin; the three sources share the bowl
/// shape but differ in curvature and oscillation.
fn bohachevsky_case() -> BenchmarkCase {
    let target = ProblemSpec::new(
        "bohachevsky",
        xy_vars(-5.0, 5.0),
        Blackbox::analytic(|x| {
            0.5 * x[0] * x[0] + x[1] * x[1] - 0.3 * (3.0 * PI * x[0] + 4.0 * PI * x[1]).cos()
                + 0.4
        }),
        vec![],
    )
    .expect("valid problem");
    let s1 = ProblemSpec::new(
        "bohachevsky_s1",
        xy_vars(-5.0, 5.0),
        Blackbox::analytic(|x| {
            x[0] * x[0] + 2.0 * x[1] * x[1] - 0.3 * (PI * x[0]).cos()
                - 0.4 * (2.0 * PI * x[1]).cos()
                + 0.7
        }),
        vec![],
    )
    .expect("valid problem");
    let s2 = ProblemSpec::new(
        "bohachevsky_s2",
        xy_vars(-5.0, 5.0),
        Blackbox::analytic(|x| {
            x[0] * x[0] + 2.0 * x[1] * x[1] - 0.3 * (PI * x[0]).cos() * (2.0 * PI * x[1]).cos()
        }),
        vec![],
    )
    .expect("valid problem");
    let s3 = ProblemSpec::new(
        "bohachevsky_s3",
        xy_vars(-5.0, 5.0),
        Blackbox::analytic(|x| {
            2.0 * x[0] * x[0] + 4.0 * x[1] * x[1]
                - 0.3 * (3.0 * PI * x[0] + 4.0 * PI * x[1]).cos()
                - 0.5
        }),
        vec![],
    )
    .expect("valid problem");
    BenchmarkCase {
        name: "bohachevsky",
        target,
        sources: [s1, s2, s3]
            .into_iter()
            .map(|problem| SourceSpec { problem, doe_size: 50 })
            .collect(),
        defaults: CaseDefaults { initial_doe_size: 2, iterations: 20, runs: 20 },
    }
}

/// Five-dimensional Rosenbrock on [-2, 2]^5 with two lower-fidelity
/// sources: a shifted-optimum variant and a rational distortion of it.
fn rosenbrock_case() -> BenchmarkCase {
    let vars = |_: ()| -> Vec<VariableMeta> {
        (1..=5).map(|i| VariableMeta::new(format!("x{i}"), -2.0, 2.0)).collect()
    };
    let s1_fn = |x: &[f64]| -> f64 {
        let mut sum = 0.0;
        for i in 0..4 {
            sum += 50.0 * (x[i + 1] - x[i] * x[i]).powi(2) + (-2.0 - x[i]).powi(2);
        }
        sum - x.iter().map(|v| 0.5 * v).sum::<f64>()
    };
    let target = ProblemSpec::new(
        "rosenbrock",
        vars(()),
        Blackbox::analytic(|x| {
            let mut sum = 0.0;
            for i in 0..4 {
                sum += 100.0 * (x[i + 1] - x[i] * x[i]).powi(2) + (1.0 - x[i]).powi(2);
            }
            sum
        }),
        vec![],
    )
    .expect("valid problem");
    let s1 = ProblemSpec::new(
        "rosenbrock_s1",
        vars(()),
        Blackbox::analytic(s1_fn),
        vec![],
    )
    .expect("valid problem");
    let s2 = ProblemSpec::new(
        "rosenbrock_s2",
        vars(()),
        Blackbox::analytic(move |x| {
            let shifted = s1_fn(x) - 4.0 - x.iter().map(|v| 0.5 * v).sum::<f64>();
            shifted / (10.0 + 1.25 * x[0])
        }),
        vec![],
    )
    .expect("valid problem");
    BenchmarkCase {
        name: "rosenbrock_mf22",
        target,
        sources: [s1, s2]
            .into_iter()
            .map(|problem| SourceSpec { problem, doe_size: 100 })
            .collect(),
        defaults: CaseDefaults { initial_doe_size: 5, iterations: 100, runs: 20 },
    }
}

/// A small constrained quadratic whose sources exercise every part of the
/// heterogeneity handling: extra and missing variables, different bounds,
/// and constraints that only match by name, category, or not at all.
/// The target optimum is (0.5, 0.5) with objective 0.5, on the boundary of
/// the `min_sum` constraint.
fn constrained_toy_case() -> BenchmarkCase {
    let target = ProblemSpec::new(
        "constrained_toy",
        xy_vars(-5.0, 5.0),
        Blackbox::analytic(|x| x[0] * x[0] + x[1] * x[1]),
        vec![
            (
                ConstraintMeta::new("min_sum", ConstraintCategory::Operational),
                Blackbox::analytic(|x| 1.0 - x[0] - x[1]),
            ),
            (
                ConstraintMeta::new("clearance_gap", ConstraintCategory::VolumetricIntegration),
                Blackbox::analytic(|x| x[0] - 4.0),
            ),
            (
                ConstraintMeta::new("spare_margin", ConstraintCategory::Environmental),
                Blackbox::analytic(|x| x[1] - 4.5),
            ),
        ],
    )
    .expect("valid problem");
    // Three variables, one shared constraint name, one category-only match.
    let s1 = ProblemSpec::new(
        "toy_s1",
        vec![
            VariableMeta::new("x1", -1.0, 1.0),
            VariableMeta::new("x2", -1.0, 1.0),
            VariableMeta::new("x3", -1.0, 1.0),
        ],
        Blackbox::analytic(|x| 1.2 * x[0] * x[0] + 0.8 * x[1] * x[1] + 0.3 * x[2]),
        vec![
            (
                ConstraintMeta::new("min_sum", ConstraintCategory::Operational),
                Blackbox::analytic(|x| 0.8 - x[0] - x[1]),
            ),
            (
                ConstraintMeta::new("fuel_reserve", ConstraintCategory::VolumetricIntegration),
                Blackbox::analytic(|x| x[0] - 3.5),
            ),
        ],
    )
    .expect("valid problem");
    // One variable only, on different bounds.
    let s2 = ProblemSpec::new(
        "toy_s2",
        vec![VariableMeta::new("x1", -4.0, 6.0)],
        Blackbox::analytic(|x| x[0] * x[0] + 3.0),
        vec![
            (
                ConstraintMeta::new("min_sum", ConstraintCategory::Operational),
                Blackbox::analytic(|x| 1.2 - x[0]),
            ),
            (
                ConstraintMeta::new("bay_height", ConstraintCategory::VolumetricIntegration),
                Blackbox::analytic(|x| x[0] - 3.0),
            ),
        ],
    )
    .expect("valid problem");
    BenchmarkCase {
        name: "constrained_toy",
        target,
        sources: [s1, s2]
            .into_iter()
            .map(|problem| SourceSpec { problem, doe_size: 40 })
            .collect(),
        defaults: CaseDefaults { initial_doe_size: 3, iterations: 25, runs: 20 },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn objective(case: &BenchmarkCase, x: &[f64]) -> f64 {
        case.target.evaluate_point(x).unwrap().0
    }

    #[test]
    fn bohachevsky_target_minimum_is_at_origin() {
        let case = benchmark_case("bohachevsky").unwrap();
        assert!((objective(&case, &[0.0, 0.0]) - 0.1).abs() < 1e-15);
        // A few nearby points sit above the optimum.
        for p in [[0.1, 0.0], [0.0, 0.1], [-0.2, 0.3], [1.0, -1.0]] {
            assert!(objective(&case, &p) > 0.1);
        }
    }

    #[test]
    fn bohachevsky_sources_match_their_formulas() {
        let case = benchmark_case("bohachevsky").unwrap();
        let s = |j: usize, x: &[f64]| case.sources[j].problem.evaluate_point(x).unwrap().0;
        assert!((s(0, &[0.0, 0.0]) - 0.0).abs() < 1e-15);
        let x = [1.3, -0.7];
        let expect1 = 1.3f64 * 1.3 + 2.0 * 0.49 - 0.3 * (PI * 1.3).cos()
            - 0.4 * (2.0 * PI * -0.7).cos()
            + 0.7;
        assert!((s(0, &x) - expect1).abs() < 1e-12);
        let expect2 =
            1.3f64 * 1.3 + 2.0 * 0.49 - 0.3 * (PI * 1.3).cos() * (2.0 * PI * -0.7).cos();
        assert!((s(1, &x) - expect2).abs() < 1e-12);
        let expect3 = 2.0 * 1.3f64 * 1.3 + 4.0 * 0.49
            - 0.3 * (3.0 * PI * 1.3 + 4.0 * PI * -0.7).cos()
            - 0.5;
        assert!((s(2, &x) - expect3).abs() < 1e-12);
    }

    #[test]
    fn rosenbrock_reference_values() {
        let case = benchmark_case("rosenbrock_mf22").unwrap();
        // The target vanishes at the all-ones point.
        assert!((objective(&case, &[1.0; 5]) - 0.0).abs() < 1e-15);
        let s1 = case.sources[0].problem.evaluate_point(&[0.0; 5]).unwrap().0;
        assert!((s1 - 16.0).abs() < 1e-12);
        // Source 2 at the origin: (16 - 4 - 0) / 10.
        let s2 = case.sources[1].problem.evaluate_point(&[0.0; 5]).unwrap().0;
        assert!((s2 - 1.2).abs() < 1e-12);
    }

    #[test]
    fn constrained_toy_optimum_is_feasible_boundary_point() {
        let case = benchmark_case("constrained_toy").unwrap();
        let (f, cs) = case.target.evaluate_point(&[0.5, 0.5]).unwrap();
        assert!((f - 0.5).abs() < 1e-15);
        assert!(cs.iter().all(|c| *c <= 1e-12), "{cs:?}");
        // The unconstrained minimum violates min_sum.
        let (_, cs0) = case.target.evaluate_point(&[0.0, 0.0]).unwrap();
        assert!(cs0[0] > 0.0);
    }

    #[test]
    fn unknown_case_is_rejected() {
        assert!(benchmark_case("nope").is_err());
        for name in all_cases() {
            assert_eq!(benchmark_case(name).unwrap().name, name);
        }
    }

    #[test]
    fn source_sampling_is_deterministic_and_sized() {
        let case = benchmark_case("constrained_toy").unwrap();
        let a = case.sample_sources(9, None).unwrap();
        let b = case.sample_sources(9, None).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2);
        assert!(a.iter().all(|d| d.n() == 40));
        assert_eq!(a[0].dim(), 3);
        assert_eq!(a[1].dim(), 1);
        let small = case.sample_sources(9, Some(12)).unwrap();
        assert!(small.iter().all(|d| d.n() == 12));
    }

    #[test]
    fn initial_sampling_differs_per_run_index() {
        let case = benchmark_case("bohachevsky").unwrap();
        let r0 = case.sample_initial(5, 0, None).unwrap();
        let r1 = case.sample_initial(5, 1, None).unwrap();
        assert_eq!(r0.n(), 2);
        assert_ne!(r0, r1);
        assert_eq!(r0, case.sample_initial(5, 0, None).unwrap());
    }
}
