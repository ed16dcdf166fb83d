//! Declarative networks: specs and presets, initialisation, losses,
//! optimisers, the training step, checkpoints and receptive fields.

mod checkpoint;
mod loss;
mod network;
mod optim;
mod presets;
mod rf;
mod spec;
mod train;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, load_checkpoint_for, save_checkpoint, Checkpoint,
};
pub use loss::{
    loss_bce, loss_cce, loss_joint, loss_mse, ordinal_head, JointLoss, LossGrad, PROB_EPSILON, ROW_SUM_TOLERANCE,
};
pub use network::{build_network, Network, Outputs, Param, Phase, RngState};
pub use optim::{adam_step, sgd_step, Optimizer, OptimizerConfig, OptimizerKind};
pub use presets::{desk_cnn, preset, HeadLayout, CNN_INPUT, FCN_INPUT, GRADES, PRESET_NAMES};
pub use rf::{default_rf_layer, receptive_field};
pub use spec::{HeadLoss, HeadSource, HeadSpec, LayerKind, LayerShape, LayerSpec, NetworkSpec};
pub use train::{epoch_batches, eval_loss, head_losses, EpochStats, optimizer_for, train_step, LossReport, LossSpec, Targets};

use crate::tensor::TensorError;

#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("layer `{layer}`: {msg}")]
    InvalidSpec { layer: String, msg: String },
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
    #[error("unknown layer `{0}`")]
    UnknownLayer(String),
    #[error("unknown head `{0}`")]
    UnknownHead(String),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("{what}: expected shape {expected:?}, found {found:?}")]
    ShapeMismatch {
        what: &'static str,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("{what}: expected length {expected}, found {found}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("label {label} outside 0..{classes}")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("row {row} is not a probability vector (sum {sum})")]
    InvalidProbabilities { row: usize, sum: f64 },
    #[error("empty batch")]
    EmptyBatch,
    #[error("loss weight {0} outside [0, 1]")]
    InvalidWeight(f64),
    #[error("no target supplied for head `{0}`")]
    MissingTarget(String),
    #[error("non-finite loss {loss}; first non-finite activation in layer `{layer}`")]
    NonFinite { layer: String, loss: f64 },
    #[error("no gradient reaches the trunk")]
    NoGradient,
    #[error("layer `{0}` has no forward cache; run forward before backward")]
    MissingCache(String),
    #[error("receptive field undefined at layer `{layer}` of kind {kind}")]
    ReceptiveField { layer: String, kind: &'static str },
    #[error("invalid optimizer config: {0}")]
    InvalidOptimizer(String),
    #[error("checkpoint format error: {0}")]
    Format(String),
    #[error("checkpoint integrity error: {0}")]
    Integrity(String),
    #[error("checkpoint was written for `{found}`, expected `{expected}`")]
    SpecMismatch { expected: String, found: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, NnError>;
