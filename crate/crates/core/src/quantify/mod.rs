//! Severity quantification: KL-grade networks trained with a
//! classification, regression, joint or ordinal objective, per-knee
//! prediction, and the end-to-end radiograph pipeline.
//!
//! Knee crops are `ROI_WIDTH x ROI_HEIGHT`. Crops of left knees are
//! mirrored so every knee reaches the network in the same orientation.
//! Before inference a crop is histogram-equalized and standardized to zero
//! mean and unit variance; training applies the identical transform.

mod pipeline;
mod predict;
mod records;
mod train;

pub use pipeline::{run_pipeline, KneeResult, Pipeline};
pub use predict::{evaluate_quantifier, knee_tensor, predict, predict_batch, round_grade, KneePrediction, QuantEval};
pub use records::{read_predictions, write_predictions, PredictionRecord};
pub use train::{canonical, knee_samples, train_quantifier, KneeSample, KneeSet, TrainConfig, TrainHistory};

pub use crate::nn::HeadLayout as Mode;

use crate::imageproc::ImageError;
use crate::locate::LocateError;
use crate::nn::NnError;

#[derive(Debug, thiserror::Error)]
pub enum QuantifyError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Locate(#[from] LocateError),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("preset `{preset}` lacks the heads {mode} training needs")]
    ModeMismatch { preset: String, mode: Mode },
    #[error("network `{0}` is not a quantifier (needs a `clsf` and/or `reg` head)")]
    NotQuantifier(String),
    #[error("knee crop is {found_w}x{found_h}, the network takes {need_w}x{need_h}")]
    InputSize {
        need_w: usize,
        need_h: usize,
        found_w: usize,
        found_h: usize,
    },
    #[error("grade {0} is not finite")]
    NonFinite(f64),
    #[error("no usable training knees")]
    EmptyTraining,
    #[error("image `{image}`: {source}")]
    Localisation {
        image: String,
        #[source]
        source: LocateError,
    },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, QuantifyError>;
