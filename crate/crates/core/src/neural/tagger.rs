use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, NerLabel, PosTag, Sentence};
use crate::crf::Task;
use crate::embeddings::{EmbRow, EmbeddingMode, EmbeddingTable};
use crate::trainlog::{EarlyStopping, EpochRecord, EpochTimer, TrainLog, Verdict};

use super::adam::{adam_update, AdamConfig, AdamState};
use super::network::{Gradients, Inference, Network, Target};
use super::NeuralError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Architecture {
    pub inference: Inference,
    pub task: Task,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NeuralTrainConfig {
    pub adam: AdamConfig,
    /// Defaults to 32 for random embeddings and 64 for pretrained ones.
    pub batch_size: Option<usize>,
    /// Per-direction LSTM units; defaults to 128 for random embeddings and
    /// 256 for pretrained ones.
    pub hidden_size: Option<usize>,
    pub max_epochs: usize,
    pub patience: usize,
    /// Weight of the POS loss in joint training.
    pub joint_loss_weight: f64,
    pub dropout: f64,
    pub seed: u64,
    pub record_time: bool,
}

impl Default for NeuralTrainConfig {
    fn default() -> Self {
        NeuralTrainConfig {
            adam: AdamConfig::default(),
            batch_size: None,
            hidden_size: None,
            max_epochs: 50,
            patience: 5,
            joint_loss_weight: 1.0,
            dropout: 0.5,
            seed: 0,
            record_time: true,
        }
    }
}

impl NeuralTrainConfig {
    pub fn default_batch_size(mode: EmbeddingMode) -> usize {
        match mode {
            EmbeddingMode::Random => 32,
            _ => 64,
        }
    }

    pub fn default_hidden_size(mode: EmbeddingMode) -> usize {
        match mode {
            EmbeddingMode::Random => 128,
            _ => 256,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NeuralTagger {
    pub network: Network,
    pub task: Task,
    pub inference: Inference,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NeuralPrediction {
    pub ner: Vec<NerLabel>,
    /// Present for joint models only.
    pub pos: Option<Vec<PosTag>>,
}

impl NeuralTagger {
    /// Fresh model: initialized encoder, zero heads (25 NER labels, plus 15
    /// POS labels for joint models).
    pub fn new(
        embedding: EmbeddingTable,
        arch: Architecture,
        hidden: usize,
        dropout: f64,
        seed: u64,
    ) -> Result<Self, NeuralError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels: &[usize] = match arch.task {
            Task::Single => &[NerLabel::COUNT],
            Task::Joint => &[NerLabel::COUNT, PosTag::COUNT],
        };
        Ok(NeuralTagger {
            network: Network::new(embedding, hidden, labels, arch.inference, dropout, &mut rng)?,
            task: arch.task,
            inference: arch.inference,
        })
    }

    pub fn tag(&self, words: &[&str]) -> NeuralPrediction {
        let mut paths = self.network.predict(words).into_iter();
        let ner = paths
            .next()
            .unwrap_or_default()
            .into_iter()
            .map(|y| NerLabel::from_index(y).expect("NER head has 25 labels"))
            .collect();
        let pos = match self.task {
            Task::Single => None,
            Task::Joint => Some(
                paths
                    .next()
                    .unwrap_or_default()
                    .into_iter()
                    .map(|y| PosTag::from_index(y).expect("POS head has 15 labels"))
                    .collect(),
            ),
        };
        NeuralPrediction { ner, pos }
    }

    /// Training objective of one sentence without dropout: NER loss, plus
    /// the weighted POS loss for joint models.
    pub fn sentence_loss(&self, sentence: &Sentence, joint_weight: f64) -> Result<f64, NeuralError> {
        let ex = Example::new(sentence);
        self.network.loss(&ex.words(), &ex.targets(self.task, joint_weight))
    }
}

pub fn tag_neural(model: &NeuralTagger, sentence: &Sentence) -> NeuralPrediction {
    model.tag(&sentence.surfaces())
}

struct Example {
    words: Vec<String>,
    ner: Vec<usize>,
    pos: Vec<usize>,
}

impl Example {
    fn new(s: &Sentence) -> Self {
        Example {
            words: s.tokens().iter().map(|t| t.surface().to_string()).collect(),
            ner: s.tokens().iter().map(|t| t.ner.index()).collect(),
            pos: s.tokens().iter().map(|t| t.pos.index()).collect(),
        }
    }

    fn words(&self) -> Vec<&str> {
        self.words.iter().map(String::as_str).collect()
    }

    fn targets(&self, task: Task, joint_weight: f64) -> Vec<Target<'_>> {
        let mut t = vec![Target {
            gold: &self.ner,
            weight: 1.0,
        }];
        if task == Task::Joint {
            t.push(Target {
                gold: &self.pos,
                weight: joint_weight,
            });
        }
        t
    }
}

/// Adam over all dense tensors plus lazily created moments for embedding
/// rows. Embedding rows are only updated on steps where they received a
/// gradient.
struct Optimizer {
    cfg: AdamConfig,
    t: u64,
    dense: Vec<AdamState>,
    rows: BTreeMap<EmbRow, (Vec<f64>, Vec<f64>)>,
}

impl Optimizer {
    fn new(cfg: AdamConfig, net: &mut Network) -> Self {
        let dense = net
            .dense_params_mut()
            .iter()
            .map(|p| AdamState::new(p.len()))
            .collect();
        Optimizer {
            cfg,
            t: 0,
            dense,
            rows: BTreeMap::new(),
        }
    }

    fn step(&mut self, net: &mut Network, grads: &Gradients) {
        self.t += 1;
        let t = self.t;
        for ((p, g), s) in net
            .dense_params_mut()
            .into_iter()
            .zip(grads.dense())
            .zip(&mut self.dense)
        {
            s.t = t;
            adam_update(p, g, &mut s.m, &mut s.v, t, &self.cfg);
        }
        if !net.embedding.mode().is_trainable() {
            return;
        }
        for (&row, g) in &grads.embedding {
            let (m, v) = self
                .rows
                .entry(row)
                .or_insert_with(|| (vec![0.0; g.len()], vec![0.0; g.len()]));
            adam_update(net.embedding.row_mut(row), g, m, v, t, &self.cfg);
        }
    }
}

fn mean_loss(net: &Network, data: &[Example], task: Task, w: f64) -> Result<f64, NeuralError> {
    let mut total = 0.0;
    for ex in data {
        total += net.loss(&ex.words(), &ex.targets(task, w))?;
    }
    Ok(total / data.len().max(1) as f64)
}

/// Trains a BiLSTM tagger with Adam on mini-batches of whole sentences.
///
/// Gradients are accumulated sentence by sentence and averaged over the
/// batch. After each epoch the validation loss (no dropout) drives early
/// stopping, and the parameters of the best epoch are returned. With an
/// empty validation corpus the epoch's training loss is monitored instead.
pub fn train_neural(
    train: &Corpus,
    valid: &Corpus,
    arch: Architecture,
    embedding: EmbeddingTable,
    config: &NeuralTrainConfig,
) -> Result<(NeuralTagger, TrainLog), NeuralError> {
    if train.is_empty() {
        return Err(NeuralError::EmptyCorpus);
    }
    if config.max_epochs == 0 || config.patience == 0 {
        return Err(NeuralError::Config("max_epochs and patience must be at least 1".into()));
    }
    if config.joint_loss_weight < 0.0 {
        return Err(NeuralError::Config("joint_loss_weight must be >= 0".into()));
    }
    let mode = embedding.mode();
    let mut log = TrainLog::default();
    let batch_size = config
        .batch_size
        .unwrap_or_else(|| NeuralTrainConfig::default_batch_size(mode));
    let hidden = config
        .hidden_size
        .unwrap_or_else(|| NeuralTrainConfig::default_hidden_size(mode));
    if batch_size == 0 {
        return Err(NeuralError::Config("batch_size must be at least 1".into()));
    }
    if batch_size != NeuralTrainConfig::default_batch_size(mode) {
        log.warnings.push(format!(
            "batch_size {batch_size} overrides the default {} for {} embeddings",
            NeuralTrainConfig::default_batch_size(mode),
            mode.as_str()
        ));
    }
    if hidden != NeuralTrainConfig::default_hidden_size(mode) {
        log.warnings.push(format!(
            "hidden_size {hidden} overrides the default {} for {} embeddings",
            NeuralTrainConfig::default_hidden_size(mode),
            mode.as_str()
        ));
    }

    let mut model = NeuralTagger::new(embedding, arch, hidden, config.dropout, config.seed)?;
    let train_set: Vec<Example> = train.sentences.iter().map(Example::new).collect();
    let valid_set: Vec<Example> = valid.sentences.iter().map(Example::new).collect();
    let w = config.joint_loss_weight;

    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(2));
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut opt = Optimizer::new(config.adam, &mut model.network);
    let mut stopper = EarlyStopping::new(config.patience);
    let mut best = model.clone();

    for epoch in 1..=config.max_epochs {
        let timer = EpochTimer::start(config.record_time);
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(batch_size) {
            let mut grads = Gradients::zeros_like(&model.network);
            for &i in batch {
                let ex = &train_set[i];
                let (loss, g) = model.network.forward_backward(
                    &ex.words(),
                    &ex.targets(arch.task, w),
                    Some(&mut dropout_rng),
                    true,
                )?;
                epoch_loss += loss;
                grads.add(&g.expect("gradients requested"));
            }
            grads.scale(1.0 / batch.len() as f64);
            opt.step(&mut model.network, &grads);
        }
        let train_loss = epoch_loss / train_set.len() as f64;
        let valid_loss = if valid_set.is_empty() {
            train_loss
        } else {
            mean_loss(&model.network, &valid_set, arch.task, w)?
        };
        log.records.push(EpochRecord {
            epoch,
            train_loss,
            valid_loss,
            seconds: timer.seconds(),
        });
        match stopper.observe(epoch, valid_loss) {
            Verdict::Improved => best = model.clone(),
            Verdict::Stale => {}
            Verdict::Stop => {
                log.stopped_early = true;
                break;
            }
        }
    }
    log.best_epoch = stopper.best_epoch();
    Ok((best, log))
}
