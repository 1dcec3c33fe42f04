//! Partial least squares weight extraction for the KPLS kernel.
//!
//! A NIPALS-style PLS1 recursion finds directions of maximal covariance
//! between (centered) inputs and output, deflating after each component. The
//! recovered weights are rotated so every component is a direct linear map
//! of the original inputs, then each weight row is rescaled to unit
//! Euclidean norm (the kernel's per-component rate absorbs scale). Masked
//! variables are excluded from the recursion and receive exactly-zero
//! weights.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

/// Near-zero threshold deciding when a deflated matrix or output carries no
/// usable covariance left.
const EXHAUSTED: f64 = 1e-12;

pub(crate) struct PlsWeights {
    /// `h x D` weight matrix, rows unit-norm, masked columns exactly zero.
    pub weights: Array2<f64>,
    /// True when the output was constant and weights fell back to a uniform
    /// single component.
    pub degenerate: bool,
}

/// Computes up to `n_components` PLS weight rows over the unmasked columns
/// of `x`. Fewer rows are returned when the data exhausts earlier.
pub(crate) fn pls_weight_matrix(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    n_components: usize,
    mask: &[bool],
) -> PlsWeights {
    let n = x.nrows();
    let d = x.ncols();
    debug_assert_eq!(mask.len(), d);
    debug_assert!(n_components >= 1);
    let active: Vec<usize> = (0..d).filter(|&j| !mask[j]).collect();
    let du = active.len();
    debug_assert!(du > 0);

    let uniform = |rows: usize| -> Array2<f64> {
        let mut w = Array2::<f64>::zeros((rows, d));
        let v = 1.0 / (du as f64).sqrt();
        for &j in &active {
            w[[0, j]] = v;
        }
        w
    };

    // Center the unmasked inputs and the output.
    let mut xc = Array2::<f64>::zeros((n, du));
    for (jj, &j) in active.iter().enumerate() {
        let col = x.column(j);
        let mean = col.sum() / n as f64;
        for i in 0..n {
            xc[[i, jj]] = col[i] - mean;
        }
    }
    let y_mean = y.sum() / n as f64;
    let mut yc: Array1<f64> = y.map(|v| v - y_mean);
    let y_scale = yc.iter().map(|v| v * v).sum::<f64>().sqrt();
    if y_scale < EXHAUSTED {
        log::warn!("PLS target column is constant; falling back to uniform weights");
        return PlsWeights { weights: uniform(1), degenerate: true };
    }

    let h_max = n_components.min(du).min(n - 1);
    let mut ws: Vec<Array1<f64>> = Vec::new();
    let mut ps: Vec<Array1<f64>> = Vec::new();
    for _ in 0..h_max {
        let mut w = xc.t().dot(&yc);
        let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < EXHAUSTED {
            break;
        }
        w.mapv_inplace(|v| v / norm);
        let t = xc.dot(&w);
        let tt = t.iter().map(|v| v * v).sum::<f64>();
        if tt < EXHAUSTED {
            break;
        }
        let p = xc.t().dot(&t) / tt;
        let c = yc.dot(&t) / tt;
        for i in 0..n {
            for j in 0..du {
                xc[[i, j]] -= t[i] * p[j];
            }
            yc[i] -= c * t[i];
        }
        ws.push(w);
        ps.push(p);
    }
    if ws.is_empty() {
        log::warn!("PLS extracted no informative component; falling back to uniform weights");
        return PlsWeights { weights: uniform(1), degenerate: true };
    }

    // Rotate deflated-space weights into direct weights on the original
    // inputs: W* = W (P^T W)^{-1}.
    let h = ws.len();
    let mut ptw = Array2::<f64>::zeros((h, h));
    for i in 0..h {
        for j in 0..h {
            ptw[[i, j]] = ps[i].dot(&ws[j]);
        }
    }
    let mut wmat = Array2::<f64>::zeros((du, h));
    for (j, w) in ws.iter().enumerate() {
        wmat.column_mut(j).assign(w);
    }
    let rotated = match solve_right(&wmat, &ptw) {
        Some(r) => r,
        None => {
            log::warn!("PLS rotation system singular; keeping unrotated weights");
            wmat
        }
    };

    let mut weights = Array2::<f64>::zeros((h, d));
    for l in 0..h {
        let norm = (0..du).map(|j| rotated[[j, l]].powi(2)).sum::<f64>().sqrt();
        if norm < EXHAUSTED {
            continue;
        }
        for (jj, &j) in active.iter().enumerate() {
            weights[[l, j]] = rotated[[jj, l]] / norm;
        }
    }
    PlsWeights { weights, degenerate: false }
}

/// Solves `X = A B^{-1}` for small `B` by Gaussian elimination with partial
/// pivoting; `None` when `B` is singular.
fn solve_right(a: &Array2<f64>, b: &Array2<f64>) -> Option<Array2<f64>> {
    let h = b.nrows();
    let mut lu = b.t().to_owned();
    let mut rhs = a.t().to_owned();
    for k in 0..h {
        let (pivot, mag) = (k..h)
            .map(|i| (i, lu[[i, k]].abs()))
            .max_by(|x, y| x.1.partial_cmp(&y.1).unwrap())
            .unwrap();
        if mag < EXHAUSTED {
            return None;
        }
        if pivot != k {
            for j in 0..h {
                lu.swap([k, j], [pivot, j]);
            }
            for j in 0..rhs.ncols() {
                rhs.swap([k, j], [pivot, j]);
            }
        }
        for i in k + 1..h {
            let f = lu[[i, k]] / lu[[k, k]];
            for j in k..h {
                lu[[i, j]] -= f * lu[[k, j]];
            }
            for j in 0..rhs.ncols() {
                rhs[[i, j]] -= f * rhs[[k, j]];
            }
        }
    }
    for k in (0..h).rev() {
        for j in 0..rhs.ncols() {
            let mut s = rhs[[k, j]];
            for i in k + 1..h {
                s -= lu[[k, i]] * rhs[[i, j]];
            }
            rhs[[k, j]] = s / lu[[k, k]];
        }
    }
    Some(rhs.t().to_owned())
}
