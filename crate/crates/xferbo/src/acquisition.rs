//! Expected improvement and its constrained maximization.
//!
//! The acquisition step is derivative-free: a Latin hypercube of candidates
//! is scored, surrogate-infeasible candidates are rejected, and the best
//! candidate is optionally polished by a bounded simplex search. Everything
//! is deterministic for a fixed seed.

use statrs::function::erf::erf;

use crate::doe::{lhs_sample, VariableMeta};
use crate::gp::Surrogate;
use crate::simplex::nelder_mead;

/// Below this predictive sd the expected improvement collapses to its
/// deterministic limit `max(y_min - mean, 0)`.
pub const DEFAULT_SD_FLOOR: f64 = 1e-12;

/// Settings of the candidate search.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct AcquisitionConfig {
    /// Latin hypercube candidates scored per acquisition step.
    pub candidate_count: usize,
    /// Simplex evaluations spent polishing the winning candidate; 0
    /// disables polishing.
    pub refine_steps: usize,
    /// Predictive-sd floor below which EI uses its deterministic limit.
    pub sd_floor: f64,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        AcquisitionConfig { candidate_count: 1000, refine_steps: 80, sd_floor: DEFAULT_SD_FLOOR }
    }
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2))
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Expected improvement of a Gaussian posterior `(mean, sd)` over the
/// incumbent `y_min`: `(y_min - mean) Phi(z) + sd phi(z)` with
/// `z = (y_min - mean) / sd`, clamped to be nonnegative.
pub fn expected_improvement(mean: f64, sd: f64, y_min: f64) -> f64 {
    expected_improvement_with_floor(mean, sd, y_min, DEFAULT_SD_FLOOR)
}

/// As [`expected_improvement`] with an explicit sd floor.
pub fn expected_improvement_with_floor(mean: f64, sd: f64, y_min: f64, sd_floor: f64) -> f64 {
    debug_assert!(sd >= 0.0, "predictive sd must be nonnegative");
    let gap = y_min - mean;
    if sd < sd_floor {
        return gap.max(0.0);
    }
    let z = gap / sd;
    (gap * normal_cdf(z) + sd * normal_pdf(z)).max(0.0)
}

/// Maximizes the expected improvement over the box, restricted to points the
/// constraint surrogates predict feasible (mean value at most 0).
///
/// `candidate_count` LHS candidates are scored; the feasible one with the
/// highest EI wins (ties by candidate index) and is polished by a simplex
/// search that penalizes surrogate infeasibility. When no candidate is
/// surrogate-feasible the candidate with the smallest total constraint
/// violation is returned unpolished. The result always lies within bounds.
pub fn maximize_constrained(
    objective: &dyn Surrogate,
    constraints: &[&dyn Surrogate],
    bounds: &[VariableMeta],
    y_min: f64,
    config: &AcquisitionConfig,
    seed: u64,
) -> Vec<f64> {
    assert!(config.candidate_count >= 1, "need at least one candidate");
    let candidates = lhs_sample(bounds, config.candidate_count, seed)
        .expect("acquisition bounds are valid variables");

    let violation = |x: &[f64]| -> f64 {
        constraints.iter().map(|c| c.predict(x).mean.max(0.0)).sum()
    };
    let ei = |x: &[f64]| -> f64 {
        let p = objective.predict(x);
        expected_improvement_with_floor(p.mean, p.sd, y_min, config.sd_floor)
    };

    let mut best_feasible: Option<(usize, f64)> = None;
    let mut least_violating: Option<(usize, f64)> = None;
    for (i, row) in candidates.outer_iter().enumerate() {
        let x = row.to_vec();
        let v = violation(&x);
        if v <= 0.0 {
            let e = ei(&x);
            if best_feasible.map_or(true, |(_, be)| e > be) {
                best_feasible = Some((i, e));
            }
        } else if least_violating.map_or(true, |(_, bv)| v < bv) {
            least_violating = Some((i, v));
        }
    }

    match best_feasible {
        Some((idx, _)) => {
            let start = candidates.row(idx).to_vec();
            if config.refine_steps == 0 {
                return start;
            }
            // Penalized negative EI keeps the polish inside the surrogate
            // feasible region; the simplex never returns worse than its
            // start, so polishing cannot lose the candidate's EI.
            let penalized = |x: &[f64]| -> f64 {
                let v = violation(x);
                if v > 0.0 {
                    1e6 + v
                } else {
                    -ei(x)
                }
            };
            let lo: Vec<f64> = bounds.iter().map(|b| b.lower).collect();
            let hi: Vec<f64> = bounds.iter().map(|b| b.upper).collect();
            let (x, _) = nelder_mead(penalized, &start, &lo, &hi, config.refine_steps, 1e-12);
            x
        }
        None => {
            let (idx, _) = least_violating.expect("at least one candidate exists");
            candidates.row(idx).to_vec()
        }
    }
}
