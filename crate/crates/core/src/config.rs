//! Run configuration in a line-oriented `key = value` format.
//!
//! Blank lines and lines starting with `#` are ignored. Every key may occur
//! once. [`RunConfig::echo`] prints the configuration with all defaults
//! resolved, and the echo parses back to the same configuration.

use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::str::FromStr;

use thiserror::Error;

use crate::crf::{CrfTrainConfig, Task};
use crate::embeddings::{EmbeddingConfig, EmbeddingMode, DESK_BUCKET_COUNT};
use crate::neural::{AdamConfig, Architecture, Inference, NeuralTrainConfig};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key {key:?}")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: invalid value {value:?} for {key}")]
    Value {
        line: usize,
        key: String,
        value: String,
    },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Crf,
    BilstmSoftmax,
    BilstmCrf,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Crf => "crf",
            ModelKind::BilstmSoftmax => "bilstm-softmax",
            ModelKind::BilstmCrf => "bilstm-crf",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "crf" => Some(ModelKind::Crf),
            "bilstm-softmax" => Some(ModelKind::BilstmSoftmax),
            "bilstm-crf" => Some(ModelKind::BilstmCrf),
            _ => None,
        }
    }

    pub fn inference(self) -> Option<Inference> {
        match self {
            ModelKind::Crf => None,
            ModelKind::BilstmSoftmax => Some(Inference::Softmax),
            ModelKind::BilstmCrf => Some(Inference::Crf),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EmbeddingChoice {
    None,
    Random,
    PretrainedFrozen,
    PretrainedFinetuned,
}

impl EmbeddingChoice {
    pub fn as_str(self) -> &'static str {
        match self {
            EmbeddingChoice::None => "none",
            EmbeddingChoice::Random => "random",
            EmbeddingChoice::PretrainedFrozen => "pretrained-frozen",
            EmbeddingChoice::PretrainedFinetuned => "pretrained-finetuned",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(EmbeddingChoice::None),
            "random" => Some(EmbeddingChoice::Random),
            "pretrained-frozen" => Some(EmbeddingChoice::PretrainedFrozen),
            "pretrained-finetuned" => Some(EmbeddingChoice::PretrainedFinetuned),
            _ => None,
        }
    }

    pub fn mode(self) -> Option<EmbeddingMode> {
        match self {
            EmbeddingChoice::None => None,
            EmbeddingChoice::Random => Some(EmbeddingMode::Random),
            EmbeddingChoice::PretrainedFrozen => Some(EmbeddingMode::Frozen),
            EmbeddingChoice::PretrainedFinetuned => Some(EmbeddingMode::Finetuned),
        }
    }

    pub fn is_pretrained(self) -> bool {
        matches!(
            self,
            EmbeddingChoice::PretrainedFrozen | EmbeddingChoice::PretrainedFinetuned
        )
    }
}

/// One experiment. Hyperparameters left as `None` take the model's default.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub task: Task,
    pub model: ModelKind,
    pub embedding: EmbeddingChoice,
    pub train: Option<PathBuf>,
    pub valid: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub vectors: Option<PathBuf>,
    /// Bucket matrix saved next to a text vector file.
    pub vector_buckets: Option<PathBuf>,
    pub model_out: Option<PathBuf>,
    pub seed: u64,
    pub record_time: bool,
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub max_epochs: usize,
    pub patience: usize,
    pub l2: f64,
    pub shuffle: bool,
    pub hidden_size: Option<usize>,
    pub dropout: f64,
    pub joint_loss_weight: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub embedding_dim: usize,
    pub min_n: usize,
    pub max_n: usize,
    pub bucket_count: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let crf = CrfTrainConfig::default();
        let nn = NeuralTrainConfig::default();
        let emb = EmbeddingConfig::default();
        RunConfig {
            task: Task::Single,
            model: ModelKind::Crf,
            embedding: EmbeddingChoice::None,
            train: None,
            valid: None,
            test: None,
            vectors: None,
            vector_buckets: None,
            model_out: None,
            seed: 0,
            record_time: true,
            learning_rate: None,
            batch_size: None,
            max_epochs: nn.max_epochs,
            patience: nn.patience,
            l2: crf.l2,
            shuffle: crf.shuffle,
            hidden_size: None,
            dropout: nn.dropout,
            joint_loss_weight: nn.joint_loss_weight,
            beta1: nn.adam.beta1,
            beta2: nn.adam.beta2,
            epsilon: nn.adam.epsilon,
            embedding_dim: emb.dim,
            min_n: emb.min_n,
            max_n: emb.max_n,
            bucket_count: DESK_BUCKET_COUNT,
        }
    }
}

pub const KEYS: [&str; 27] = [
    "task",
    "model",
    "embedding",
    "train",
    "valid",
    "test",
    "vectors",
    "vector_buckets",
    "model_out",
    "seed",
    "record_time",
    "learning_rate",
    "batch_size",
    "max_epochs",
    "patience",
    "l2",
    "shuffle",
    "hidden_size",
    "dropout",
    "joint_loss_weight",
    "beta1",
    "beta2",
    "epsilon",
    "embedding_dim",
    "min_n",
    "max_n",
    "bucket_count",
];

fn value<T: FromStr>(line: usize, key: &str, raw: &str) -> Result<T, ConfigError> {
    raw.parse().map_err(|_| ConfigError::Value {
        line,
        key: key.to_string(),
        value: raw.to_string(),
    })
}

impl FromStr for RunConfig {
    type Err = ConfigError;

    fn from_str(text: &str) -> Result<Self, ConfigError> {
        let mut c = RunConfig::default();
        let mut seen: Vec<String> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.trim();
            if content.is_empty() || content.starts_with('#') {
                continue;
            }
            let (key, val) = content.split_once('=').ok_or(ConfigError::Syntax { line })?;
            let (key, val) = (key.trim(), val.trim());
            if key.is_empty() || val.is_empty() {
                return Err(ConfigError::Syntax { line });
            }
            if !KEYS.contains(&key) {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                });
            }
            if seen.iter().any(|k| k == key) {
                return Err(ConfigError::DuplicateKey {
                    line,
                    key: key.to_string(),
                });
            }
            seen.push(key.to_string());
            let bad = || ConfigError::Value {
                line,
                key: key.to_string(),
                value: val.to_string(),
            };
            match key {
                "task" => c.task = Task::parse(val).ok_or_else(bad)?,
                "model" => c.model = ModelKind::parse(val).ok_or_else(bad)?,
                "embedding" => c.embedding = EmbeddingChoice::parse(val).ok_or_else(bad)?,
                "train" => c.train = Some(val.into()),
                "valid" => c.valid = Some(val.into()),
                "test" => c.test = Some(val.into()),
                "vectors" => c.vectors = Some(val.into()),
                "vector_buckets" => c.vector_buckets = Some(val.into()),
                "model_out" => c.model_out = Some(val.into()),
                "seed" => c.seed = value(line, key, val)?,
                "record_time" => c.record_time = value(line, key, val)?,
                "learning_rate" => c.learning_rate = Some(value(line, key, val)?),
                "batch_size" => c.batch_size = Some(value(line, key, val)?),
                "max_epochs" => c.max_epochs = value(line, key, val)?,
                "patience" => c.patience = value(line, key, val)?,
                "l2" => c.l2 = value(line, key, val)?,
                "shuffle" => c.shuffle = value(line, key, val)?,
                "hidden_size" => c.hidden_size = Some(value(line, key, val)?),
                "dropout" => c.dropout = value(line, key, val)?,
                "joint_loss_weight" => c.joint_loss_weight = value(line, key, val)?,
                "beta1" => c.beta1 = value(line, key, val)?,
                "beta2" => c.beta2 = value(line, key, val)?,
                "epsilon" => c.epsilon = value(line, key, val)?,
                "embedding_dim" => c.embedding_dim = value(line, key, val)?,
                "min_n" => c.min_n = value(line, key, val)?,
                "max_n" => c.max_n = value(line, key, val)?,
                "bucket_count" => c.bucket_count = value(line, key, val)?,
                _ => unreachable!("key list checked above"),
            }
        }
        c.validate()?;
        Ok(c)
    }
}

impl RunConfig {
    /// Checks the model/embedding combination and numeric ranges.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        match (self.model, self.embedding) {
            (ModelKind::Crf, EmbeddingChoice::Random) => {
                return invalid("model = crf does not support embedding = random");
            }
            (ModelKind::BilstmSoftmax | ModelKind::BilstmCrf, EmbeddingChoice::None) => {
                return invalid("bilstm models need an embedding other than none");
            }
            _ => {}
        }
        if self.embedding.is_pretrained() && self.vectors.is_none() {
            return invalid("pretrained embeddings need a vectors path");
        }
        if self.vector_buckets.is_some() && !self.embedding.is_pretrained() {
            return invalid("vector_buckets applies to pretrained embeddings only");
        }
        if self.max_epochs == 0 || self.patience == 0 {
            return invalid("max_epochs and patience must be at least 1");
        }
        if self.batch_size == Some(0) || self.hidden_size == Some(0) {
            return invalid("batch_size and hidden_size must be at least 1");
        }
        if self.learning_rate.is_some_and(|lr| !(lr > 0.0)) {
            return invalid("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return invalid("dropout must be in [0, 1)");
        }
        if !(self.l2 >= 0.0) || !(self.joint_loss_weight >= 0.0) {
            return invalid("l2 and joint_loss_weight must be non-negative");
        }
        if self.embedding_dim == 0 || self.min_n == 0 || self.min_n > self.max_n || self.bucket_count == 0 {
            return invalid("embedding settings need dim >= 1, 1 <= min_n <= max_n, bucket_count >= 1");
        }
        Ok(())
    }

    pub fn is_neural(&self) -> bool {
        self.model != ModelKind::Crf
    }

    pub fn crf_config(&self) -> CrfTrainConfig {
        let d = CrfTrainConfig::default();
        CrfTrainConfig {
            l2: self.l2,
            learning_rate: self.learning_rate.unwrap_or(d.learning_rate),
            epochs: self.max_epochs,
            patience: self.patience,
            batch_size: self.batch_size.unwrap_or(d.batch_size),
            seed: self.seed,
            shuffle: self.shuffle,
            record_time: self.record_time,
        }
    }

    pub fn neural_config(&self) -> NeuralTrainConfig {
        let d = NeuralTrainConfig::default();
        NeuralTrainConfig {
            adam: AdamConfig {
                learning_rate: self.learning_rate.unwrap_or(d.adam.learning_rate),
                beta1: self.beta1,
                beta2: self.beta2,
                epsilon: self.epsilon,
            },
            batch_size: self.batch_size,
            hidden_size: self.hidden_size,
            max_epochs: self.max_epochs,
            patience: self.patience,
            joint_loss_weight: self.joint_loss_weight,
            dropout: self.dropout,
            seed: self.seed,
            record_time: self.record_time,
        }
    }

    pub fn architecture(&self) -> Option<Architecture> {
        self.model.inference().map(|inference| Architecture {
            inference,
            task: self.task,
        })
    }

    pub fn embedding_config(&self) -> EmbeddingConfig {
        EmbeddingConfig {
            dim: self.embedding_dim,
            min_n: self.min_n,
            max_n: self.max_n,
            bucket_count: self.bucket_count,
            seed: self.seed,
        }
    }

    /// The configuration with defaults resolved for its model kind. Keys
    /// that do not affect the run are left out.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: &dyn fmt::Display| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("task", &self.task.as_str());
        kv("model", &self.model);
        kv("embedding", &self.embedding.as_str());
        for (k, p) in [
            ("train", &self.train),
            ("valid", &self.valid),
            ("test", &self.test),
            ("vectors", &self.vectors),
            ("vector_buckets", &self.vector_buckets),
            ("model_out", &self.model_out),
        ] {
            if let Some(p) = p {
                kv(k, &p.display());
            }
        }
        kv("seed", &self.seed);
        kv("record_time", &self.record_time);
        kv("max_epochs", &self.max_epochs);
        kv("patience", &self.patience);
        if self.is_neural() {
            let nn = self.neural_config();
            let mode = self.embedding.mode().unwrap_or(EmbeddingMode::Random);
            kv("learning_rate", &nn.adam.learning_rate);
            kv(
                "batch_size",
                &nn.batch_size.unwrap_or_else(|| NeuralTrainConfig::default_batch_size(mode)),
            );
            kv(
                "hidden_size",
                &nn.hidden_size.unwrap_or_else(|| NeuralTrainConfig::default_hidden_size(mode)),
            );
            kv("dropout", &self.dropout);
            kv("joint_loss_weight", &self.joint_loss_weight);
            kv("beta1", &self.beta1);
            kv("beta2", &self.beta2);
            kv("epsilon", &self.epsilon);
        } else {
            let crf = self.crf_config();
            kv("learning_rate", &crf.learning_rate);
            kv("batch_size", &crf.batch_size);
            kv("l2", &self.l2);
            kv("shuffle", &self.shuffle);
        }
        if self.embedding != EmbeddingChoice::None {
            kv("embedding_dim", &self.embedding_dim);
        }
        if self.embedding == EmbeddingChoice::Random {
            kv("min_n", &self.min_n);
            kv("max_n", &self.max_n);
            kv("bucket_count", &self.bucket_count);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_echoes() {
        let text = "# best neural setup\ntask = joint\nmodel = bilstm-crf\nembedding = pretrained-finetuned\nvectors = v.txt\ntrain=a.conll\n";
        let c: RunConfig = text.parse().unwrap();
        assert_eq!(c.task, Task::Joint);
        assert_eq!(c.model, ModelKind::BilstmCrf);
        assert_eq!(c.train, Some(PathBuf::from("a.conll")));
        let echo = c.echo();
        assert!(echo.contains("hidden_size = 256\n"));
        assert!(echo.contains("batch_size = 64\n"));
        assert!(echo.contains("learning_rate = 0.001\n"));
        let back: RunConfig = echo.parse().unwrap();
        assert_eq!(back.neural_config().adam, c.neural_config().adam);
        assert_eq!(back.echo(), echo);
    }

    #[test]
    fn crf_echo_round_trips() {
        let c: RunConfig = "model = crf\nl2 = 0.5\nseed = 7\n".parse().unwrap();
        let back: RunConfig = c.echo().parse().unwrap();
        assert_eq!(back.crf_config(), c.crf_config());
        assert_eq!(back.crf_config().learning_rate, 0.05);
        assert_eq!(back.crf_config().batch_size, 8);
    }

    #[test]
    fn rejects_bad_files() {
        let err = |t: &str| t.parse::<RunConfig>().unwrap_err();
        assert!(matches!(err("colour = blue"), ConfigError::UnknownKey { line: 1, .. }));
        assert!(matches!(err("seed = 1\nseed = 2"), ConfigError::DuplicateKey { line: 2, .. }));
        assert!(matches!(err("seed = x"), ConfigError::Value { .. }));
        assert!(matches!(err("just words"), ConfigError::Syntax { line: 1 }));
        assert!(matches!(err("model = crf\nembedding = random"), ConfigError::Invalid(_)));
        assert!(matches!(err("model = bilstm-crf"), ConfigError::Invalid(_)));
        assert!(matches!(err("model = crf\nembedding = pretrained-frozen"), ConfigError::Invalid(_)));
        assert!(matches!(err("dropout = 1.0"), ConfigError::Invalid(_)));
    }
}
