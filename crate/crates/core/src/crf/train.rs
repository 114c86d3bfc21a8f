use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::Corpus;
use crate::embeddings::EmbeddingTable;
use crate::trainlog::{EarlyStopping, EpochRecord, EpochTimer, TrainLog, Verdict};

use super::features::{sentence_features, FeatureConfig};
use super::model::{CompiledPosition, CrfModel};
use super::{CrfError, CrfGradient, CrfLabel, Task};

#[derive(Clone, Debug, PartialEq)]
pub struct CrfTrainConfig {
    pub l2: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub shuffle: bool,
    /// Record wall-clock seconds in the log; off for byte-stable logs.
    pub record_time: bool,
}

impl Default for CrfTrainConfig {
    fn default() -> Self {
        CrfTrainConfig {
            l2: 0.1,
            learning_rate: 0.05,
            epochs: 50,
            patience: 5,
            batch_size: 8,
            seed: 0,
            shuffle: true,
            record_time: true,
        }
    }
}

impl CrfTrainConfig {
    fn validate(&self) -> Result<(), CrfError> {
        if self.epochs == 0 || self.patience == 0 || self.batch_size == 0 {
            return Err(CrfError::Config(
                "epochs, patience and batch_size must be at least 1".into(),
            ));
        }
        if self.l2 < 0.0 || !self.l2.is_finite() || !self.learning_rate.is_finite() {
            return Err(CrfError::Config("l2 must be a finite value >= 0".into()));
        }
        Ok(())
    }
}

fn label_set(train: &Corpus, task: Task) -> Vec<CrfLabel> {
    match task {
        Task::Single => CrfModel::single_task_labels(),
        Task::Joint => {
            let observed: BTreeSet<(usize, usize)> = train
                .sentences
                .iter()
                .flat_map(|s| s.tokens().iter().map(|t| (t.ner.index(), t.pos.index())))
                .collect();
            observed
                .into_iter()
                .map(|(ner, pos)| CrfLabel {
                    ner: crate::corpus::NerLabel::from_index(ner).expect("valid index"),
                    pos: crate::corpus::PosTag::from_index(pos),
                })
                .collect()
        }
    }
}

struct Example {
    compiled: Vec<CompiledPosition>,
    gold: Vec<usize>,
}

fn mean_nll(model: &CrfModel, examples: &[Example]) -> Result<f64, CrfError> {
    let mut total = 0.0;
    for ex in examples {
        total += model.nll_and_gradient_compiled(&ex.compiled, &ex.gold, 0.0)?.0;
    }
    Ok(total / examples.len().max(1) as f64)
}

/// Trains a CRF by mini-batch gradient descent on the summed sentence NLL.
///
/// Each batch of `b` sentences out of `N` also carries `b/N` of the L2
/// penalty. After every epoch the mean validation NLL is checked for early
/// stopping and the best epoch's weights are returned. In joint mode,
/// validation sentences containing a `(NER, POS)` pair never seen in
/// training are left out of the validation loss. With an empty validation
/// corpus the training loss is monitored instead.
pub fn train_crf(
    train: &Corpus,
    valid: &Corpus,
    config: &CrfTrainConfig,
    task: Task,
    embeddings: Option<&EmbeddingTable>,
) -> Result<(CrfModel, TrainLog), CrfError> {
    config.validate()?;
    if train.is_empty() {
        return Err(CrfError::EmptyCorpus);
    }
    let feature_config = FeatureConfig {
        use_embeddings: embeddings.is_some(),
    };
    let labels = label_set(train, task);

    let train_features = train
        .sentences
        .iter()
        .map(|s| sentence_features(&s.surfaces(), feature_config, embeddings))
        .collect::<Result<Vec<_>, _>>()?;
    let mut names = Vec::new();
    let mut seen = HashMap::new();
    for fv in train_features.iter().flatten() {
        for (k, _) in fv.iter() {
            if !seen.contains_key(k) {
                seen.insert(k.to_string(), names.len());
                names.push(k.to_string());
            }
        }
    }
    let mut model = CrfModel::new(task, labels, names, feature_config, embeddings.cloned())?;
    model.trained_on = format!(
        "task={} sentences={} tokens={} embeddings={}",
        task.as_str(),
        train.len(),
        train.token_count(),
        feature_config.use_embeddings
    );

    let mut train_set = Vec::with_capacity(train.len());
    for (s, fv) in train.sentences.iter().zip(&train_features) {
        train_set.push(Example {
            compiled: model.compile(fv),
            gold: model.gold(s)?,
        });
    }
    let mut valid_set = Vec::new();
    for s in &valid.sentences {
        let Ok(gold) = model.gold(s) else { continue };
        let fv = sentence_features(&s.surfaces(), feature_config, embeddings)?;
        valid_set.push(Example {
            compiled: model.compile(&fv),
            gold,
        });
    }

    let n = train_set.len() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut stopper = EarlyStopping::new(config.patience);
    let mut best = model.clone();
    let mut log = TrainLog::default();

    for epoch in 1..=config.epochs {
        let timer = EpochTimer::start(config.record_time);
        if config.shuffle {
            order.shuffle(&mut rng);
        }
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut grad = CrfGradient::zeros(model.labels().len());
            for &i in batch {
                let ex = &train_set[i];
                let (nll, g) = model.nll_and_gradient_compiled(&ex.compiled, &ex.gold, 0.0)?;
                epoch_loss += nll;
                grad.accumulate(&g);
            }
            if config.l2 > 0.0 {
                let share = batch.len() as f64 / n;
                model.scale_weights(1.0 - config.learning_rate * config.l2 * share);
            }
            model.apply_gradient(&grad, config.learning_rate);
        }
        let train_loss = epoch_loss / n;
        let valid_loss = if valid_set.is_empty() {
            train_loss
        } else {
            mean_nll(&model, &valid_set)?
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
