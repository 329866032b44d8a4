//! Decentralized federated learning: local training, TopK exchange, and
//! neighbour weighting driven by F1 and class-distribution divergence.

pub mod compress;
pub mod coordinator;
pub mod data;
pub mod federation;
pub mod message;
pub mod model;
pub mod stats;
pub mod weighting;

use thiserror::Error;

pub use compress::{compress_topk, decompress, SparseLayer, SparseUpdate};
pub use coordinator::{DomainLearner, NeighborState, RoundReport, StepFrom, TrainingHyperparams, Weighting};
pub use data::{featurize_device, predict_context, ContextPrediction};
pub use federation::{DflRecord, Federation, SyntheticSetup};
pub use message::{decode_checkpoint, encode_checkpoint, RoundMessage};
pub use model::{local_update, Activation, Architecture, Dataset, ModelParameters};
pub use stats::{class_distribution, f1_score, kl_divergence, macro_f1, F1Formula};
pub use weighting::{
    aggregate, learning_rate_from_adjustments, learning_rate_round, normalize_weights, update_alpha,
    weight_adjustment_factor,
};

#[derive(Debug, Error, PartialEq)]
pub enum DflError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    EmptyInput,
    #[error("distribution does not sum to 1 (sum {0})")]
    NotNormalized(f64),
    #[error("index {index} out of range for layer of length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("model shapes differ")]
    ShapeMismatch,
    #[error("non-finite gradient")]
    NonFiniteGradient,
    #[error("bad architecture: {0}")]
    BadArchitecture(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("invalid training config: {0}")]
    Config(String),
}
