//! Benchmarks of the optimizer's hot paths: surrogate training, prediction,
//! ensemble assembly, and a full acquisition step. Fixtures come from the
//! built-in bohachevsky case so sizes match what an optimization run
//! actually trains on.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use xferbo::{
    benchmark_case, build_ensemble, lhs_sample, maximize_constrained, train_gp,
    AcquisitionConfig, CriteriaConfig, CriteriaRole, Doe, KernelKind, SourceGpCache, Surrogate,
    TrainConfig, VariancePolicy,
};

fn fixtures() -> (Doe, Vec<Doe>) {
    let case = benchmark_case("bohachevsky").unwrap();
    let target = case.sample_initial(7, 0, Some(20)).unwrap();
    let sources = case.sample_sources(7, None).unwrap();
    (target, sources)
}

fn bench_training(c: &mut Criterion) {
    let (target, sources) = fixtures();
    let mut group = c.benchmark_group("train");
    group.sample_size(20);
    group.bench_function("se_2d_20pts", |b| {
        b.iter(|| {
            train_gp(
                black_box(target.objective_column()),
                KernelKind::Se,
                &TrainConfig::default(),
            )
            .unwrap()
        })
    });
    group.bench_function("kpls_2d_50pts", |b| {
        b.iter(|| {
            train_gp(
                black_box(sources[0].objective_column()),
                KernelKind::Kpls { max_components: None },
                &TrainConfig::default(),
            )
            .unwrap()
        })
    });
    group.finish();
}

fn bench_prediction(c: &mut Criterion) {
    let (target, _) = fixtures();
    let gp = train_gp(target.objective_column(), KernelKind::Se, &TrainConfig::default()).unwrap();
    c.bench_function("predict_se_2d_20pts", |b| {
        b.iter(|| black_box(&gp).predict(black_box(&[1.3, -2.1])))
    });
}

fn bench_ensemble(c: &mut Criterion) {
    let (target, sources) = fixtures();
    let columns: Vec<_> = sources.iter().map(|s| s.objective_column()).collect();
    let mut group = c.benchmark_group("ensemble");
    group.sample_size(10);
    // Cold: trains every source surrogate from scratch, the cost of the
    // first optimizer iteration.
    group.bench_function("cold_3_sources", |b| {
        b.iter(|| {
            let mut cache = SourceGpCache::new();
            build_ensemble(
                black_box(&columns),
                target.objective_column(),
                &CriteriaConfig::default(),
                CriteriaRole::Objective,
                VariancePolicy::TargetVariance,
                &TrainConfig::default(),
                &mut cache,
            )
            .unwrap()
        })
    });
    // Warm: source models cached, the recurring per-iteration cost of
    // re-scoring and re-weighting against the grown target sample.
    let mut cache = SourceGpCache::new();
    group.bench_function("warm_3_sources", |b| {
        b.iter(|| {
            build_ensemble(
                black_box(&columns),
                target.objective_column(),
                &CriteriaConfig::default(),
                CriteriaRole::Objective,
                VariancePolicy::TargetVariance,
                &TrainConfig::default(),
                &mut cache,
            )
            .unwrap()
        })
    });
    group.finish();
}

fn bench_acquisition(c: &mut Criterion) {
    let (target, _) = fixtures();
    let gp = train_gp(target.objective_column(), KernelKind::Se, &TrainConfig::default()).unwrap();
    let y_min = target.objective_values().iter().cloned().fold(f64::INFINITY, f64::min);
    c.bench_function("acquisition_step_2d", |b| {
        b.iter(|| {
            maximize_constrained(
                black_box(&gp),
                &[],
                target.variables(),
                y_min,
                &AcquisitionConfig::default(),
                11,
            )
        })
    });
}

fn bench_sampling(c: &mut Criterion) {
    let (target, _) = fixtures();
    c.bench_function("lhs_1000x2", |b| {
        b.iter(|| lhs_sample(black_box(target.variables()), 1000, 3).unwrap())
    });
}

criterion_group!(
    benches,
    bench_training,
    bench_prediction,
    bench_ensemble,
    bench_acquisition,
    bench_sampling
);
criterion_main!(benches);
