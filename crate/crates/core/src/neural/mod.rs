//! BiLSTM sequence taggers.
//!
//! Word vectors from an [`EmbeddingTable`](crate::embeddings::EmbeddingTable)
//! feed a bidirectional LSTM whose concatenated states are projected to
//! label scores by one head per task. Each head ends in either an
//! independent softmax or a linear-chain CRF. Joint models share the
//! encoder between an NER head and a POS head and sum their losses.
//! Gradients are computed by hand (backpropagation through time) and
//! parameters are updated with Adam.

mod adam;
mod heads;
mod lstm;
mod network;
mod tagger;

use thiserror::Error;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use heads::{apply_dropout, crf_head_loss, joint_loss, softmax_head_loss};
pub use lstm::{bilstm_encode, lstm_cell, LstmParams};
pub use network::{Gradients, Head, Inference, Network, Target};
pub use tagger::{
    tag_neural, train_neural, Architecture, NeuralPrediction, NeuralTagger, NeuralTrainConfig,
};

use crate::crf::CrfError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NeuralError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("sentence is empty")]
    EmptySentence,
    #[error("gold label {label} out of range for {labels} labels")]
    LabelOutOfRange { label: usize, labels: usize },
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl From<CrfError> for NeuralError {
    fn from(e: CrfError) -> Self {
        match e {
            CrfError::EmptySequence => NeuralError::EmptySentence,
            other => NeuralError::Shape(other.to_string()),
        }
    }
}
