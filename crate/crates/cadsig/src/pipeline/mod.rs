//! Training, decoding, and interactive-completion orchestration.

mod autocomplete;
mod decode;
mod train;

pub use autocomplete::{autocomplete, next_step_candidates, AutocompleteResult, StepCandidate};
pub use decode::{decode, feature_matrix, Candidate, DecodeResult, Sampling};
pub use train::{prepare_samples, train, LogLine, TrainConfig, TrainSample, TrainStats};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("training aborted: {0}")]
    Training(String),
    #[error("{0}")]
    Tensor(#[from] crate::tensor::TensorError),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("io: {0}")]
    Io(String),
}
