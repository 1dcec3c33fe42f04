//! Property tests of the similarity criteria and the affine recalibration,
//! checked against independent enumerations.

use ndarray::{Array1, Array2};
use proptest::prelude::*;
use xferbo::transfer::{accuracy_tau, variance_tau};
use xferbo::{
    build_ensemble, discordant_tau, epanechnikov, fit_transfer, CriteriaConfig, CriteriaRole,
    Doe, KernelKind, SourceGpCache, Surrogate, TrainConfig, VariableMeta,
};
use xferbo::transfer::VariancePolicy;

/// Enumerates the discordance index pairs explicitly: every `m`, paired with
/// every `k` except the first index, self-pairs included.
fn discordance_by_enumeration(s: &[f64], t: &[f64]) -> f64 {
    let n = s.len();
    let mut pairs = Vec::new();
    for m in 0..n {
        for k in 0..n {
            if k != 0 {
                pairs.push((m, k));
            }
        }
    }
    let disagreements = pairs
        .into_iter()
        .filter(|&(m, k)| (s[m] < s[k]) != (t[m] < t[k]))
        .count();
    disagreements as f64 / n as f64
}

proptest! {
    #[test]
    fn discordance_matches_pair_enumeration(
        pairs in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 2..9)
    ) {
        let (s, t): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let got = discordant_tau(&s, &t);
        let expect = discordance_by_enumeration(&s, &t);
        prop_assert_eq!(got, expect);
    }

    #[test]
    fn discordance_vanishes_under_increasing_affine_maps(
        t in prop::collection::vec(-100.0f64..100.0, 2..9),
        scale in 0.1f64..10.0,
        shift in -5.0f64..5.0
    ) {
        // A strictly increasing map preserves every strict ordering, so the
        // disagreement count is zero whatever the index pair set.
        let s: Vec<f64> = t.iter().map(|v| scale * v + shift).collect();
        prop_assert_eq!(discordant_tau(&s, &t), 0.0);
    }

    #[test]
    fn epanechnikov_is_bounded_and_cut_off(tau in -10.0f64..10.0, rho in 0.01f64..5.0) {
        let v = epanechnikov(tau, rho);
        prop_assert!(v >= 0.0 && v <= 0.75);
        if (tau / rho).abs() > 1.0 {
            prop_assert_eq!(v, 0.0);
        }
        prop_assert_eq!(v, epanechnikov(-tau, rho));
    }

    #[test]
    fn accuracy_matches_violation_count(
        pairs in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 1..12),
        eps in 0.001f64..1.0
    ) {
        let (s, t): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let mut violations = 0usize;
        for (a, b) in s.iter().zip(&t) {
            let err = (a - b).abs();
            let scale = if b.abs() < 1e-12 { 1.0 } else { b.abs() };
            if err / scale > eps {
                violations += 1;
            }
        }
        let expect = violations as f64 / s.len() as f64;
        prop_assert_eq!(accuracy_tau(&s, &t, eps), expect);
    }

    #[test]
    fn variance_matches_violation_count(
        sds in prop::collection::vec(0.0f64..10.0, 1..12),
        vals in prop::collection::vec(-50.0f64..50.0, 1..12),
        sigma_max in 0.001f64..1.0
    ) {
        prop_assume!(vals.iter().any(|v| *v != 0.0));
        let y_max = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let violations = sds.iter().filter(|s| **s > sigma_max * y_max).count();
        let expect = violations as f64 / sds.len() as f64;
        prop_assert_eq!(variance_tau(&sds, &vals, sigma_max), expect);
    }
}

fn doe_1d(name: &str, xs: &[f64], ys: &[f64]) -> Doe {
    Doe::new(
        vec![VariableMeta::new(name, -2.0, 2.0)],
        Array2::from_shape_vec((xs.len(), 1), xs.to_vec()).unwrap(),
        Array1::from_vec(ys.to_vec()),
        vec![],
    )
    .unwrap()
}

fn sample_xs(n: usize, seed: u64) -> Vec<f64> {
    let vars = vec![VariableMeta::new("x", -2.0, 2.0)];
    xferbo::lhs_sample(&vars, n, seed)
        .unwrap()
        .column(0)
        .to_vec()
}

/// The affine recalibration is a least-squares fit: no grid point around the
/// fitted coefficients reaches a lower sum of squared errors.
#[test]
fn fitted_adjustment_beats_local_coefficient_grid() {
    for seed in 0..5u64 {
        let xs = sample_xs(15, 100 + seed);
        let ys: Vec<f64> = xs.iter().map(|x| (1.3 * x).sin() + 0.2 * x).collect();
        let source = doe_1d("x", &xs, &ys);
        let gp = xferbo::train_gp(source.objective_column(), KernelKind::Se, &TrainConfig::default())
            .unwrap();

        let txs = sample_xs(12, 200 + seed);
        let tys: Vec<f64> = txs.iter().map(|x| 2.0 * ((1.3 * x).sin() + 0.2 * x) - 0.7).collect();
        let target = doe_1d("x", &txs, &tys);
        let (alpha, beta) = fit_transfer(&gp, target.objective_column());

        let preds: Vec<f64> = txs.iter().map(|x| gp.predict(&[*x]).mean).collect();
        let sse = |a: f64, b: f64| -> f64 {
            preds.iter().zip(&tys).map(|(p, y)| (a * p + b - y).powi(2)).sum()
        };
        let fitted = sse(alpha, beta);
        for i in 0..=200 {
            for j in 0..=200 {
                let a = alpha - 1.0 + i as f64 / 100.0;
                let b = beta - 1.0 + j as f64 / 100.0;
                assert!(
                    fitted <= sse(a, b) + 1e-9,
                    "grid point ({a}, {b}) beats the fit in seed {seed}"
                );
            }
        }
    }
}

/// A source carrying the target's own function earns a larger model
/// probability than an unrelated noise source in nearly every seeded
/// instance.
#[test]
fn related_source_outweighs_noise_source() {
    let mut wins = 0;
    let total = 10;
    for seed in 0..total {
        let f = |x: f64| (x - 0.4).powi(2);
        let txs = sample_xs(8, 300 + seed);
        let tys: Vec<f64> = txs.iter().map(|x| f(*x)).collect();
        let target = doe_1d("x", &txs, &tys);

        let gxs = sample_xs(20, 400 + seed);
        let gys: Vec<f64> = gxs.iter().map(|x| f(*x)).collect();
        let good = doe_1d("x", &gxs, &gys);

        let nxs = sample_xs(20, 500 + seed);
        let mut rng_state = 900 + seed;
        let nys: Vec<f64> = nxs
            .iter()
            .map(|_| {
                // Small deterministic LCG; any signal-free sequence works.
                rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (rng_state >> 33) as f64 / (1u64 << 31) as f64 - 0.5
            })
            .collect();
        let noise = doe_1d("x", &nxs, &nys);

        let mut cache = SourceGpCache::new();
        let ensemble = build_ensemble(
            &[good.objective_column(), noise.objective_column()],
            target.objective_column(),
            &CriteriaConfig::default(),
            CriteriaRole::Objective,
            VariancePolicy::TargetVariance,
            &TrainConfig::default(),
            &mut cache,
        )
        .unwrap();
        let p = ensemble.probabilities();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
        if p[0] > p[1] {
            wins += 1;
        }
    }
    assert!(wins >= 9, "related source won only {wins}/{total} seeds");
}
