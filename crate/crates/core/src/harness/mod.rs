//! Scripted demonstrator, learned-vs-ground-truth evaluation, the repeated
//! trial experiment and feature-field export.

mod eval;
mod experiment;
mod field;
mod oracle;

pub use eval::{evaluate_mse, normalized_mse, EvalSample};
pub use experiment::{build_pool, load_trace_dir, run_experiment, run_trials, ExperimentResult, ExperimentSpec};
pub use field::{emit_feature_field, feature_field, FieldCell, FieldSource, GridSpec};
pub use oracle::{generate_oracle_trace, generate_oracle_trace_with, OracleParams};

use crate::capture::CaptureError;
use crate::kinematics::KinematicsError;
use crate::learning::LearningError;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("no configuration with {feature} ≥ {threshold} found in {tries} samples")]
    NoHighRegion { feature: String, threshold: f64, tries: usize },
    #[error("oracle could not complete a {feature} trace after {restarts} restarts")]
    TraceStalled { feature: String, restarts: usize },
    #[error("ground truth is constant over the evaluation sample")]
    DegenerateRange,
    #[error("{dir}: found {found} traces, need at least {needed}")]
    InsufficientTraces { dir: PathBuf, found: usize, needed: usize },
    #[error("invalid experiment spec: {0}")]
    InvalidSpec(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Capture(#[from] CaptureError),
    #[error(transparent)]
    Learning(#[from] LearningError),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}
