//! Bounded Nelder-Mead simplex minimization.
//!
//! Used for the local refinement steps of hyperparameter training and
//! acquisition polishing. Proposed points are projected onto the box before
//! evaluation, and the whole procedure is deterministic.

/// Minimizes `f` over the box `[lo, hi]` starting from `x0`, with at most
/// `max_evals` function evaluations. Returns the best point and value seen.
pub(crate) fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    lo: &[f64],
    hi: &[f64],
    max_evals: usize,
    tol: f64,
) -> (Vec<f64>, f64) {
    let n = x0.len();
    let clamp = |x: &mut [f64]| {
        for i in 0..n {
            x[i] = x[i].clamp(lo[i], hi[i]);
        }
    };
    let mut evals = 0usize;
    let mut eval = |x: &mut Vec<f64>, evals: &mut usize| {
        clamp(x);
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    // Initial simplex: x0 plus one vertex per dimension, stepped by 10% of
    // the box width (inward when x0 sits at the upper bound).
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let mut p0 = x0.to_vec();
    let v0 = eval(&mut p0, &mut evals);
    simplex.push((p0, v0));
    for i in 0..n {
        let mut p = x0.to_vec();
        let step = 0.1 * (hi[i] - lo[i]);
        p[i] = if p[i] + step <= hi[i] { p[i] + step } else { p[i] - step };
        let v = eval(&mut p, &mut evals);
        simplex.push((p, v));
    }

    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        let spread = simplex[n].1 - simplex[0].1;
        if spread.abs() < tol {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|i| simplex[..n].iter().map(|(p, _)| p[i]).sum::<f64>() / n as f64)
            .collect();
        let worst = simplex[n].clone();
        let mut reflect: Vec<f64> =
            (0..n).map(|i| centroid[i] + (centroid[i] - worst.0[i])).collect();
        let fr = eval(&mut reflect, &mut evals);
        if fr < simplex[0].1 {
            let mut expand: Vec<f64> =
                (0..n).map(|i| centroid[i] + 2.0 * (centroid[i] - worst.0[i])).collect();
            let fe = eval(&mut expand, &mut evals);
            simplex[n] = if fe < fr { (expand, fe) } else { (reflect, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (reflect, fr);
        } else {
            let mut contract: Vec<f64> =
                (0..n).map(|i| centroid[i] + 0.5 * (worst.0[i] - centroid[i])).collect();
            let fc = eval(&mut contract, &mut evals);
            if fc < worst.1 {
                simplex[n] = (contract, fc);
            } else {
                let best = simplex[0].0.clone();
                for v in simplex.iter_mut().skip(1) {
                    let mut p: Vec<f64> =
                        (0..n).map(|i| best[i] + 0.5 * (v.0[i] - best[i])).collect();
                    let fv = eval(&mut p, &mut evals);
                    *v = (p, fv);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    simplex.swap_remove(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_quadratic_minimum_inside_box() {
        let (x, v) = nelder_mead(
            |x| (x[0] - 0.3).powi(2) + 2.0 * (x[1] + 0.7).powi(2),
            &[0.9, 0.9],
            &[-1.0, -1.0],
            &[1.0, 1.0],
            400,
            1e-12,
        );
        assert!((x[0] - 0.3).abs() < 1e-4);
        assert!((x[1] + 0.7).abs() < 1e-4);
        assert!(v < 1e-7);
    }

    #[test]
    fn respects_bounds_when_minimum_is_outside() {
        let (x, _) = nelder_mead(
            |x| (x[0] - 5.0).powi(2),
            &[0.0],
            &[-1.0],
            &[1.0],
            200,
            1e-12,
        );
        assert!((x[0] - 1.0).abs() < 1e-6);
    }
}
