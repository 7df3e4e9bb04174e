//! Feature learning from traces, reward composition, confidence estimation,
//! reward re-fitting and reward-optimal planning.

mod encoding;
mod irl;
mod network;
mod planner;
mod reward;
mod train;

pub use encoding::{encode_state, encode_state_with_jacobian, encoding_dim, StateEncoding};
pub use irl::{update_reward, IrlParams};
pub use network::{FeatureNetwork, Normalization, FORMAT_VERSION, HIDDEN_UNITS};
pub use planner::{plan_trajectory, plan_trajectory_traced, straight_line, PlanParams, PlanReport};
pub use reward::{confidence, needs_new_feature, Feature, RewardModel, CONFIDENCE_THRESHOLD, TORQUE_NOISE_FLOOR};
pub use train::{initial_network, loss_and_grad, trace_normalization, train_feature, train_feature_from, TrainParams, TrainingSet};

use crate::kinematics::KinematicsError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LearningError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("no traces supplied")]
    EmptyTraces,
    #[error("inconsistent dimensions: {0}")]
    InconsistentDimensions(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("record has no torques matching its trajectory")]
    MissingTorques,
    #[error("expected a {expected} demonstration, got {got}")]
    WrongDemoType { expected: &'static str, got: String },
    #[error("no demonstrations supplied")]
    NoDemos,
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("malformed network file: {0}")]
    Format(String),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}
