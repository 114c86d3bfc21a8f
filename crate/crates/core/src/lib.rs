//! Sequence labeling for word-level named entity recognition.
//!
//! The crate covers the whole experimental pipeline: BIOES corpora in CoNLL
//! format ([`corpus`]), word vectors with hashed character n-grams
//! ([`embeddings`]), a feature-based linear-chain CRF ([`crf`]), BiLSTM
//! taggers with softmax or CRF output layers and optional joint POS tagging
//! ([`neural`]), token-level evaluation ([`metrics`]), and a binary model
//! format plus command-line front end ([`persist`], [`cli`]).

pub mod cli;
pub mod config;
pub mod corpus;
pub mod embeddings;
pub mod crf;
pub mod matrix;
pub mod metrics;
pub mod neural;
pub mod persist;
pub mod synth;
pub mod trainlog;

pub use crf::Task;
