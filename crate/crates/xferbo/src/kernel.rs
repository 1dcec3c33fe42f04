//! Covariance kernels for Gaussian process surrogates.
//!
//! Two kernels are provided: an anisotropic squared exponential, and a
//! partial-least-squares (KPLS) kernel that measures distances in a small
//! number of learned linear components instead of the full input space.
//! Masked variables carry an exactly-zero weight in every KPLS component,
//! which makes predictions bitwise invariant to their value.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

/// Squared exponential kernel parameters: process variance and one length
/// scale per input dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeKernelParams {
    pub variance: f64,
    pub length_scales: Vec<f64>,
}

/// KPLS kernel parameters: process variance, one rate per retained
/// component, and the `n_components x dim` weight matrix projecting inputs
/// onto components. Weight rows have unit Euclidean norm except for entries
/// of masked variables, which are exactly zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KplsParams {
    pub variance: f64,
    pub thetas: Vec<f64>,
    pub weights: Array2<f64>,
}

impl KplsParams {
    pub fn n_components(&self) -> usize {
        self.weights.nrows()
    }
}

/// Squared exponential covariance
/// `variance * prod_d exp(-(x_d - x2_d)^2 / (2 l_d))`.
pub fn se_kernel(x: &[f64], x2: &[f64], params: &SeKernelParams) -> f64 {
    params.variance * se_correlation(x, x2, &params.length_scales)
}

/// KPLS covariance
/// `variance * prod_l exp(-theta_l * sum_d (w_ld x_d - w_ld x2_d)^2)`.
pub fn kpls_kernel(x: &[f64], x2: &[f64], params: &KplsParams) -> f64 {
    params.variance * kpls_correlation(x, x2, &params.thetas, &params.weights)
}

pub(crate) fn se_correlation(x: &[f64], x2: &[f64], length_scales: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), x2.len());
    debug_assert_eq!(x.len(), length_scales.len());
    let mut expo = 0.0;
    for d in 0..x.len() {
        let diff = x[d] - x2[d];
        expo += diff * diff / (2.0 * length_scales[d]);
    }
    (-expo).exp()
}

pub(crate) fn kpls_correlation(
    x: &[f64],
    x2: &[f64],
    thetas: &[f64],
    weights: &Array2<f64>,
) -> f64 {
    debug_assert_eq!(x.len(), x2.len());
    debug_assert_eq!(weights.nrows(), thetas.len());
    debug_assert_eq!(weights.ncols(), x.len());
    let mut expo = 0.0;
    for (l, &theta) in thetas.iter().enumerate() {
        let mut sq = 0.0;
        for d in 0..x.len() {
            let w = weights[[l, d]];
            // Written as (w x - w x2), not w (x - x2): a zero weight then
            // contributes an exact +0.0 term for any finite coordinate.
            let diff = w * x[d] - w * x2[d];
            sq += diff * diff;
        }
        expo += theta * sq;
    }
    (-expo).exp()
}
