//! Dense Cholesky routines for small symmetric positive definite systems.
//!
//! Correlation matrices in this crate stay small (a few hundred rows at
//! most), so a plain O(n^3) factorization without blocking or pivoting is
//! both sufficient and easy to audit.

use ndarray::{Array1, Array2, ArrayView1};

/// Lower-triangular Cholesky factor of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Array2<f64>,
}

impl Cholesky {
    /// Factors `a = L L^T`. Fails if a non-positive pivot appears, which is
    /// how callers detect that the matrix needs a larger nugget.
    pub fn new(a: &Array2<f64>) -> Option<Cholesky> {
        let n = a.nrows();
        debug_assert_eq!(n, a.ncols());
        let mut l = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in 0..=i {
                let mut s = a[[i, j]];
                for k in 0..j {
                    s -= l[[i, k]] * l[[j, k]];
                }
                if i == j {
                    if s <= 0.0 || !s.is_finite() {
                        return None;
                    }
                    l[[i, i]] = s.sqrt();
                } else {
                    l[[i, j]] = s / l[[j, j]];
                }
            }
        }
        Some(Cholesky { l })
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// Solves `A x = b` via forward and back substitution.
    pub fn solve(&self, b: ArrayView1<f64>) -> Array1<f64> {
        let n = self.dim();
        let mut x = b.to_owned();
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s -= self.l[[i, k]] * x[k];
            }
            x[i] = s / self.l[[i, i]];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= self.l[[k, i]] * x[k];
            }
            x[i] = s / self.l[[i, i]];
        }
        x
    }

    /// Log-determinant of `A`, i.e. twice the log-trace of `L`'s diagonal.
    pub fn log_det(&self) -> f64 {
        (0..self.dim()).map(|i| self.l[[i, i]].ln()).sum::<f64>() * 2.0
    }

    /// Full inverse of `A`, used where the diagonal of `A^-1` is needed.
    pub fn inverse(&self) -> Array2<f64> {
        let n = self.dim();
        let mut inv = Array2::<f64>::zeros((n, n));
        for j in 0..n {
            let mut e = Array1::<f64>::zeros(n);
            e[j] = 1.0;
            inv.column_mut(j).assign(&self.solve(e.view()));
        }
        inv
    }
}
