//! The learning stack: fixed invariant featurization, permutation-symmetric
//! bond encoding, gated set aggregation, and MSE training with Adam.

pub mod config;
pub mod encoder;
pub mod featurize;
pub mod mlp;
pub mod train;

pub use config::{taxonomy_row, InputKind, ModelConfig};
pub use encoder::{
    encode_bond, encode_set, mse_and_gradients_set, mse_and_gradients_single, predict,
    predict_batch_set, predict_batch_single, EncodedRows, EncoderGrads, EncoderParams, ModelInput,
};
pub use featurize::{bond_input, featurize_conformer, BondInput, ConformerFeatures, FEATURE_DIM};
pub use mlp::{Adam, Mlp};
pub use train::{
    load_checkpoint, save_checkpoint, train, EpochStats, Hyperparams, TrainLog, TrainingData,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("{what}: expected dimension {expected}, got {got}")]
    DimensionMismatch { what: String, expected: usize, got: usize },
    #[error("empty conformer set")]
    EmptySet,
    #[error("empty {0} split")]
    EmptySplit(&'static str),
    #[error("non-finite activation in {location}")]
    NonFinite { location: String },
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("graph has no descriptor bond assigned")]
    MissingDescriptorBond,
    #[error("atom {0} is not part of the featurized set")]
    AtomNotFeaturized(usize),
    #[error("model has no gate network")]
    MissingGate,
    #[error("input does not match the config's input kind {0:?}")]
    InputKindMismatch(InputKind),
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}
