//! Metrics and the mode × regime ablation grid.

mod ablation;
mod metrics;

pub use ablation::{run_ablation, AblationCell, AblationTable, BASELINE_METHOD};
pub use metrics::{
    aggregate, evaluate, hit_ratio, ndcg_at_k, per_class_prf, precision_at_k, ClassStats, ConfusionStats, EvalReport,
};

use thiserror::Error;

use crate::reasoner::ReasonerError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("nothing to evaluate")]
    EmptyInput,
    #[error("key mismatch: {0}")]
    KeyMismatch(String),
    #[error("k must be at least 1")]
    BadK,
    #[error("region `{0}` has no ground truth")]
    MissingTruth(String),
    #[error(transparent)]
    Reasoner(#[from] ReasonerError),
}
