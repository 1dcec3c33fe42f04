//! Constrained Bayesian optimization with transfer learning.
//!
//! `xferbo` implements an EGO-style optimizer for expensive black-box problems
//! of the form
//!
//! ```text
//! min f(x)  subject to  c_i(x) <= 0,  x in [lower, upper]
//! ```
//!
//! together with a transfer-learning variant that accelerates early iterations
//! by recycling evaluation data from related source problems. Source data sets
//! are wrapped in Gaussian process surrogates once, affinely recalibrated
//! against the growing target data every iteration, and blended into a
//! weighted ensemble whose member probabilities come from rank-, accuracy- and
//! variance-based similarity criteria.
//!
//! The main entry points are:
//!
//! * [`doe`] - design-of-experiments containers, Latin hypercube sampling and
//!   black-box evaluation,
//! * [`gp`] - Gaussian process training and prediction with squared
//!   exponential or partial-least-squares (KPLS) kernels,
//! * [`transfer`] - affine source recalibration, similarity scoring and the
//!   ensemble surrogate,
//! * [`heterogeneity`] - variable alignment and constraint matching between
//!   problems that do not share the same design space,
//! * [`acquisition`] - constrained expected improvement maximization,
//! * [`optimizer`] - the vanilla ([`optimizer::run_vbo`]) and transfer
//!   ([`optimizer::run_tlbo`]) optimization loops,
//! * [`benchmarks`] - built-in analytic test cases.
//!
//! All randomized components take explicit seeds and are deterministic for a
//! fixed seed on a fixed build.

pub mod acquisition;
pub mod benchmarks;
pub mod doe;
mod error;
pub mod gp;
pub mod heterogeneity;
mod kernel;
mod linalg;
pub mod optimizer;
mod pls;
pub mod seed;
mod simplex;
pub mod transfer;

pub use acquisition::{expected_improvement, maximize_constrained, AcquisitionConfig};
pub use benchmarks::{all_cases, benchmark_case, BenchmarkCase, SourceSpec};
pub use doe::{
    evaluate_doe, lhs_sample, Blackbox, ConstraintCategory, ConstraintMeta, Doe, DoeColumn,
    ProblemSpec, VariableMeta,
};
pub use error::Error;
pub use gp::{
    fit_kpls_weights, log_marginal_likelihood, train_gp, GpModel, KernelKind, KernelParams,
    Prediction, Surrogate, TrainConfig,
};
pub use heterogeneity::{
    align_source_doe, build_masked_source_gp, match_constraints, AlignmentMap,
};
pub use kernel::{kpls_kernel, se_kernel, KplsParams, SeKernelParams};
pub use optimizer::{best_feasible, run_tlbo, run_vbo, OptimizerConfig, RunHistory, VariancePolicy};
pub use transfer::{
    build_ensemble, discordant_tau, epanechnikov, fit_transfer, score_and_weight, CriteriaConfig,
    CriteriaRole, CriteriaWeights, EnsembleSurrogate, SourceGpCache, SourceModel,
};
