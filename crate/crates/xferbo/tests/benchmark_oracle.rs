//! Exhaustive grid oracles for the built-in benchmark problems, plus a
//! small end-to-end recovery check on the constrained case.

use xferbo::doe::{evaluate_doe, lhs_sample, uniform_sample};
use xferbo::{benchmark_case, best_feasible, run_tlbo, run_vbo, OptimizerConfig};

const PI: f64 = std::f64::consts::PI;

/// relative 1e-12 agreement, comfortably above reordering noise
fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * (1.0 + b.abs())
}

#[test]
fn bohachevsky_grid_minimum_sits_at_origin() {
    let case = benchmark_case("bohachevsky").unwrap();
    let f = &case.target.objective;

    let n = 2001usize;
    let step = 10.0 / (n - 1) as f64;
    let mut best = f64::INFINITY;
    let mut arg = (0usize, 0usize);
    for i in 0..n {
        let x1 = -5.0 + i as f64 * step;
        for j in 0..n {
            let x2 = -5.0 + j as f64 * step;
            let value = f.call(&[x1, x2]).unwrap();
            assert!(value >= 0.1 - 1e-12, "f({x1}, {x2}) = {value} below the global floor");
            if value < best {
                best = value;
                arg = (i, j);
            }
        }
    }
    // 0.5 x1^2 + x2^2 dominates the cosine dip everywhere but the origin.
    assert_eq!(arg, (1000, 1000));
    assert!((best - 0.1).abs() < 1e-12, "grid minimum {best}");
}

#[test]
fn constrained_toy_feasible_grid_minimum() {
    let case = benchmark_case("constrained_toy").unwrap();

    let n = 1001usize;
    let step = 10.0 / (n - 1) as f64;
    let mut best = f64::INFINITY;
    let mut arg = (f64::NAN, f64::NAN);
    for i in 0..n {
        let x1 = -5.0 + i as f64 * step;
        for j in 0..n {
            let x2 = -5.0 + j as f64 * step;
            let (value, constraints) = case.target.evaluate_point(&[x1, x2]).unwrap();
            if constraints.iter().all(|c| *c <= 0.0) && value < best {
                best = value;
                arg = (x1, x2);
            }
        }
    }
    // Minimizing x1^2 + x2^2 on the half-plane x1 + x2 >= 1 puts the
    // optimum on the boundary at (0.5, 0.5); both coordinates lie on the
    // 0.01-spaced grid.
    assert!((best - 0.5).abs() < 1e-12, "feasible grid minimum {best}");
    assert!((arg.0 - 0.5).abs() < 1e-12 && (arg.1 - 0.5).abs() < 1e-12, "argmin {arg:?}");
}

#[test]
fn rosenbrock_target_is_nonnegative_with_root_at_ones() {
    let case = benchmark_case("rosenbrock_mf22").unwrap();
    let f = &case.target.objective;

    assert_eq!(f.call(&[1.0; 5]).unwrap(), 0.0);
    // Independent hand evaluation: each of the four terms at the origin is
    // 100 * 0 + (1 - 0)^2.
    assert_eq!(f.call(&[0.0; 5]).unwrap(), 4.0);

    let inputs = lhs_sample(&case.target.variables, 200, 77).unwrap();
    for row in inputs.rows() {
        let value = f.call(row.as_slice().unwrap()).unwrap();
        assert!(value >= 0.0);
    }
}

#[test]
fn bohachevsky_family_matches_straight_line_reimplementation() {
    let case = benchmark_case("bohachevsky").unwrap();
    let target = &case.target.objective;
    let sources: Vec<_> = case.sources.iter().map(|s| &s.problem.objective).collect();

    let points = uniform_sample(&case.target.variables, 10_000, 4242).unwrap();
    for row in points.rows() {
        let (x1, x2) = (row[0], row[1]);
        let s1 = x1 * x1 + 2.0 * x2 * x2
            - 0.3 * (PI * x1).cos()
            - 0.4 * (2.0 * PI * x2).cos()
            + 0.7;
        let s2 = x1 * x1 + 2.0 * x2 * x2 - 0.3 * (PI * x1).cos() * (2.0 * PI * x2).cos();
        let s3 = 2.0 * x1 * x1 + 4.0 * x2 * x2 - 0.3 * (3.0 * PI * x1 + 4.0 * PI * x2).cos()
            - 0.5;
        let t = 0.5 * x1 * x1 + x2 * x2 - 0.3 * (3.0 * PI * x1 + 4.0 * PI * x2).cos() + 0.4;
        let x = [x1, x2];
        assert!(close(sources[0].call(&x).unwrap(), s1));
        assert!(close(sources[1].call(&x).unwrap(), s2));
        assert!(close(sources[2].call(&x).unwrap(), s3));
        assert!(close(target.call(&x).unwrap(), t));
    }
}

#[test]
fn rosenbrock_family_matches_straight_line_reimplementation() {
    let case = benchmark_case("rosenbrock_mf22").unwrap();
    let target = &case.target.objective;
    let sources: Vec<_> = case.sources.iter().map(|s| &s.problem.objective).collect();

    let points = uniform_sample(&case.target.variables, 10_000, 777).unwrap();
    for row in points.rows() {
        let (x1, x2, x3, x4, x5) = (row[0], row[1], row[2], row[3], row[4]);
        let s1 = 50.0 * (x2 - x1 * x1) * (x2 - x1 * x1) + (-2.0 - x1) * (-2.0 - x1)
            + 50.0 * (x3 - x2 * x2) * (x3 - x2 * x2) + (-2.0 - x2) * (-2.0 - x2)
            + 50.0 * (x4 - x3 * x3) * (x4 - x3 * x3) + (-2.0 - x3) * (-2.0 - x3)
            + 50.0 * (x5 - x4 * x4) * (x5 - x4 * x4) + (-2.0 - x4) * (-2.0 - x4)
            - 0.5 * (x1 + x2 + x3 + x4 + x5);
        let s2 = (s1 - 4.0 - 0.5 * (x1 + x2 + x3 + x4 + x5)) / (10.0 + 1.25 * x1);
        let t = 100.0 * (x2 - x1 * x1) * (x2 - x1 * x1) + (1.0 - x1) * (1.0 - x1)
            + 100.0 * (x3 - x2 * x2) * (x3 - x2 * x2) + (1.0 - x2) * (1.0 - x2)
            + 100.0 * (x4 - x3 * x3) * (x4 - x3 * x3) + (1.0 - x3) * (1.0 - x3)
            + 100.0 * (x5 - x4 * x4) * (x5 - x4 * x4) + (1.0 - x4) * (1.0 - x4);
        let x = [x1, x2, x3, x4, x5];
        assert!(close(sources[0].call(&x).unwrap(), s1));
        assert!(close(sources[1].call(&x).unwrap(), s2));
        assert!(close(target.call(&x).unwrap(), t));
    }
}

#[test]
fn vbo_recovers_constrained_toy_optimum() {
    let case = benchmark_case("constrained_toy").unwrap();
    let spec = &case.target;

    let mut hits = 0;
    let runs = 6u64;
    for i in 0..runs {
        let inputs = lhs_sample(&spec.variables, 6, 500 + i).unwrap();
        let initial = evaluate_doe(spec, &inputs).unwrap();
        let config = OptimizerConfig::vbo(15, 800 + i);
        let history = run_vbo(spec, &initial, &config).unwrap();
        let (_, value) = best_feasible(&history).expect("a feasible point should be found");
        if value <= 0.65 {
            hits += 1;
        }
    }
    // The feasible optimum is 0.5; allow one stalled run out of six.
    assert!(hits >= 5, "only {hits}/{runs} runs reached 0.65");
}

#[test]
fn tlbo_recovers_constrained_toy_optimum_within_five_percent() {
    let case = benchmark_case("constrained_toy").unwrap();
    let spec = &case.target;
    let iterations = case.defaults.iterations;

    // The toy sources are deliberately biased near the active constraint
    // (one source cannot see x2 at all), so pure transfer steps stall a few
    // percent short of the boundary optimum. Alternating in plain
    // target-GP steps bounds that bias and restores full precision.
    let mut hits = 0;
    let runs = case.defaults.runs as u64;
    for i in 0..runs {
        let sources = case.sample_sources(300 + i, None).unwrap();
        let initial = case.sample_initial(300 + i, i as usize, None).unwrap();
        let mut config = OptimizerConfig::tlbo(iterations, 600 + i);
        config.alternation_interval = Some(2);
        let history = run_tlbo(spec, &sources, &initial, &config).unwrap();
        let (_, value) = best_feasible(&history).expect("a feasible point should be found");
        if value <= 0.5 * 1.05 {
            hits += 1;
        }
    }
    assert!(hits >= 15, "only {hits}/{runs} runs reached within 5% of the optimum");
}
