//! IDM baseline, safety oracle, metrics and QPR sweeps.

mod idm;
mod metrics;
mod oracle;
mod sweep;

use thiserror::Error;

pub use idm::{idm_accel, idm_leader, idm_policy, IdmParams};
pub use metrics::{
    count_safe, decision_alignment, idm_episode, parse_conditions, safety_rate, Condition, ConditionLog, Evaluation,
    Evaluator, MetricsRow, MetricsTable,
};
pub use oracle::{safety_oracle, OracleConfig, SafetyVerdict};
pub use sweep::{in_conflict_window, qpr_sweep, write_sweep_csv, SweepKind, SweepParams, SweepRow};

use crate::agent::AgentError;
use crate::memory::MemoryError;
use crate::scene::SceneError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("gap must be positive, got {0}")]
    NonPositiveGap(f64),
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error("episode log is empty")]
    EmptyLog,
    #[error("scene {0} has no ground-truth label")]
    MissingLabels(String),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error(transparent)]
    Scene(#[from] SceneError),
}
