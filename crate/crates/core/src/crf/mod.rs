//! Feature-based linear-chain CRF.
//!
//! Sentences are turned into sparse [`FeatureVector`]s (word context,
//! affixes, digit/hyphen flags, position bucket, optionally dense embedding
//! components), scored against per-label state weights, and decoded exactly
//! with Viterbi. Training maximizes the conditional log-likelihood with
//! mini-batch gradient descent and L2 regularization.
//!
//! The joint POS+NER variant runs on the product label space of
//! `(NER, POS)` pairs observed in training; predictions are projected back
//! to their NER component.

mod features;
mod inference;
mod model;
mod train;

use std::fmt;

use thiserror::Error;

use crate::corpus::{NerLabel, PosTag};

pub use features::{extract_features, sentence_features, FeatureConfig, FeatureVector};
pub use inference::{log_partition, marginals, path_score, viterbi, Marginals};
pub use model::{tag_crf, CrfGradient, CrfModel};
pub use train::{train_crf, CrfTrainConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CrfError {
    #[error("sequence is empty")]
    EmptySequence,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("embedding features requested but no embedding table is available")]
    MissingEmbeddings,
    #[error("label {0} is not in the model's label set")]
    UnknownLabel(String),
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("invalid training configuration: {0}")]
    Config(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Task {
    /// NER labels only.
    Single,
    /// NER and POS predicted together.
    Joint,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Single => "single",
            Task::Joint => "joint",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "single" => Some(Task::Single),
            "joint" => Some(Task::Joint),
            _ => None,
        }
    }
}

/// A CRF output label: an NER label, paired with a POS tag in joint mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CrfLabel {
    pub ner: NerLabel,
    pub pos: Option<PosTag>,
}

impl fmt::Display for CrfLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.pos {
            None => write!(f, "{}", self.ner),
            Some(pos) => write!(f, "{}|{}", self.ner, pos),
        }
    }
}

impl CrfLabel {
    pub fn parse(s: &str) -> Option<Self> {
        match s.split_once('|') {
            None => Some(CrfLabel {
                ner: s.parse().ok()?,
                pos: None,
            }),
            Some((ner, pos)) => Some(CrfLabel {
                ner: ner.parse().ok()?,
                pos: Some(pos.parse().ok()?),
            }),
        }
    }
}
