//! Experiment harness around the `xferbo` library: JSON experiment
//! configs, a child-process bridge for external problems, batch execution
//! with paired seeding, and summary tables.

pub mod config;
pub mod external;
pub mod runner;
pub mod summary;

pub use config::{ExperimentConfig, ExternalProblem, Method, SourceData};
pub use runner::{run_experiment, ExperimentReport, Manifest, RunOutcome, RunStatus};
pub use summary::summarize_dir;
