//! Predictions and evaluation measures over verified primitives.

mod features;
mod metrics;
mod screening;
mod svm;

pub use features::{extract_features, FeatureInputs, PrimitiveSet, FEATURE_NAMES, N_FEATURES};
pub use metrics::{classification_metrics, mae, pearson_r, rmse, smr, smr_within, ClassificationMetrics, ScoreMetrics};
pub use screening::{zero_shot_predict, Method, ScreeningResult, Trigger, ZeroShotMode, Z_CUTOFF};
pub use svm::{svm_fit, svm_predict, Gamma, KernelSvmModel, Prediction, Standardizer, SvmParams, MODEL_FORMAT};

#[derive(Debug, thiserror::Error)]
pub enum InferenceError {
    #[error("inputs have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("inputs are empty")]
    Empty,
    #[error("pearson correlation undefined: {0} is constant")]
    Constant(&'static str),
    #[error("training data needs examples of both classes")]
    SingleClass,
    #[error("feature rows have inconsistent width: expected {expected}, got {got}")]
    Width { expected: usize, got: usize },
    #[error("non-finite feature value")]
    NonFinite,
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("cannot screen: {0}")]
    Screening(String),
    #[error("model document: {0}")]
    Model(String),
}
