//! Command-line front end.
//!
//! Data goes to the `out` writer and logs to `err`. Exit codes: 0 on
//! success, 1 when input data fails to parse or validate, 2 on usage or
//! configuration errors.

use std::ffi::OsString;
use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use thiserror::Error;

use crate::config::{EmbeddingChoice, RunConfig};
use crate::corpus::{parse_conll, parse_surfaces, validate_bioes, Corpus, TagStats};
use crate::crf::{extract_features, train_crf, FeatureConfig};
use crate::embeddings::EmbeddingTable;
use crate::metrics::EvalReport;
use crate::neural::train_neural;
use crate::persist::{load_bucket_sidecar, SavedModel};
use crate::trainlog::TrainLog;

#[derive(Debug, Parser)]
#[command(name = "seqlab", version, about = "Sequence labeling for named entity recognition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print tag counts per entity type and position.
    Stats { corpus: PathBuf },
    /// List BIOES violations as `sentence=<i> pos=<j> rule=<name>`.
    Validate { corpus: PathBuf },
    /// Train a model from a `key = value` run configuration.
    Train { config: PathBuf },
    /// Tag the first column of a CoNLL-style file.
    Tag { model: PathBuf, input: PathBuf },
    /// Score a model against a gold corpus.
    Eval { model: PathBuf, gold: PathBuf },
    /// Print the CRF features of one token, one per line.
    DumpFeatures {
        input: PathBuf,
        #[arg(long, default_value_t = 0)]
        sentence: usize,
        #[arg(long)]
        position: usize,
        /// CRF model whose feature settings and embeddings to use.
        #[arg(long)]
        model: Option<PathBuf>,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Data(_) => 1,
            CliError::Usage(_) => 2,
        }
    }
}

fn data<E: std::fmt::Display>(context: &Path) -> impl Fn(E) -> CliError + '_ {
    move |e| CliError::Data(format!("{}: {e}", context.display()))
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(data(path))
}

fn load_corpus(path: &Path, strict: bool) -> Result<Corpus, CliError> {
    let mut c = parse_conll(&read(path)?, strict).map_err(data(path))?;
    c.name = path.display().to_string();
    Ok(c)
}

fn load_model(path: &Path) -> Result<SavedModel, CliError> {
    SavedModel::load(path).map(|(m, _)| m).map_err(data(path))
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    0
                }
                _ => 2,
            };
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    let io = |e: std::io::Error| CliError::Data(e.to_string());
    match cmd {
        Command::Stats { corpus } => {
            let c = load_corpus(&corpus, false)?;
            let stats = TagStats::from_corpus(&c);
            write!(out, "{}\n{}", stats.to_table(), stats.to_csv()).map_err(io)?;
            Ok(0)
        }
        Command::Validate { corpus } => {
            let c = load_corpus(&corpus, false)?;
            let mut clean = true;
            for (i, s) in c.sentences.iter().enumerate() {
                for v in validate_bioes(&s.ner_labels()) {
                    clean = false;
                    writeln!(out, "sentence={i} pos={} rule={}", v.position, v.rule.name()).map_err(io)?;
                }
            }
            Ok(if clean { 0 } else { 1 })
        }
        Command::Train { config } => {
            let text = fs::read_to_string(&config)
                .map_err(|e| CliError::Usage(format!("{}: {e}", config.display())))?;
            let cfg: RunConfig = text
                .parse()
                .map_err(|e| CliError::Usage(format!("{}: {e}", config.display())))?;
            let (model, _) = train_from_config(&cfg, err)?;
            if let Some(test) = &cfg.test {
                let gold = load_corpus(test, true)?;
                let report = evaluate(&model, &gold)?;
                write!(out, "{}\n{}", report.to_text(), report.to_csv()).map_err(io)?;
            }
            Ok(0)
        }
        Command::Tag { model, input } => {
            let m = load_model(&model)?;
            let sentences = parse_surfaces(&read(&input)?).map_err(data(&input))?;
            let mut buf = String::new();
            for (i, words) in sentences.iter().enumerate() {
                let surfaces: Vec<&str> = words.iter().map(String::as_str).collect();
                let (ner, pos) = m.tag(&surfaces).map_err(data(&input))?;
                if i > 0 {
                    buf.push('\n');
                }
                for (t, w) in surfaces.iter().enumerate() {
                    buf.push_str(w);
                    buf.push('\t');
                    buf.push_str(&ner[t].to_string());
                    if let Some(p) = &pos {
                        buf.push('\t');
                        buf.push_str(p[t].as_str());
                    }
                    buf.push('\n');
                }
            }
            out.write_all(buf.as_bytes()).map_err(io)?;
            Ok(0)
        }
        Command::Eval { model, gold } => {
            let m = load_model(&model)?;
            let g = load_corpus(&gold, true)?;
            let report = evaluate(&m, &g)?;
            write!(out, "{}\n{}", report.to_text(), report.to_csv()).map_err(io)?;
            Ok(0)
        }
        Command::DumpFeatures {
            input,
            sentence,
            position,
            model,
        } => {
            let sentences = parse_surfaces(&read(&input)?).map_err(data(&input))?;
            let words = sentences.get(sentence).ok_or_else(|| {
                CliError::Usage(format!("sentence {sentence} out of range ({} sentences)", sentences.len()))
            })?;
            let surfaces: Vec<&str> = words.iter().map(String::as_str).collect();
            if position >= surfaces.len() {
                return Err(CliError::Usage(format!(
                    "position {position} out of range ({} tokens)",
                    surfaces.len()
                )));
            }
            let loaded = model.as_deref().map(load_model).transpose()?;
            let (fc, emb) = match &loaded {
                None => (FeatureConfig::default(), None),
                Some(SavedModel::Crf(m)) => (m.feature_config(), m.embeddings()),
                Some(SavedModel::Neural(_)) => {
                    return Err(CliError::Usage("dump-features needs a crf model".into()))
                }
            };
            let fv = extract_features(&surfaces, position, fc, emb).map_err(data(&input))?;
            for (k, v) in fv.iter() {
                writeln!(out, "{k}\t{v}").map_err(io)?;
            }
            Ok(0)
        }
    }
}

/// Tags every sentence of `gold` and scores the NER predictions.
pub fn evaluate(model: &SavedModel, gold: &Corpus) -> Result<EvalReport, CliError> {
    let mut golds = Vec::with_capacity(gold.len());
    let mut preds = Vec::with_capacity(gold.len());
    for s in &gold.sentences {
        let (ner, _) = model
            .tag(&s.surfaces())
            .map_err(|e| CliError::Data(e.to_string()))?;
        golds.push(s.ner_labels());
        preds.push(ner);
    }
    EvalReport::new(&golds, &preds).map_err(|e| CliError::Data(e.to_string()))
}

fn build_embeddings(cfg: &RunConfig, train: &Corpus) -> Result<Option<EmbeddingTable>, CliError> {
    let Some(mode) = cfg.embedding.mode() else {
        return Ok(None);
    };
    let mut table = if cfg.embedding == EmbeddingChoice::Random {
        let mut vocab: Vec<String> = train
            .sentences
            .iter()
            .flat_map(|s| s.surfaces().into_iter().map(str::to_string))
            .collect();
        vocab.sort();
        vocab.dedup();
        EmbeddingTable::init_random(&vocab, &cfg.embedding_config())
            .map_err(|e| CliError::Data(e.to_string()))?
    } else {
        let path = cfg.vectors.as_deref().expect("validated config has vectors");
        let file = fs::File::open(path).map_err(data(path))?;
        let mut t = EmbeddingTable::load_text_vectors(BufReader::new(file), &cfg.embedding_config())
            .map_err(data(path))?;
        if let Some(sidecar) = &cfg.vector_buckets {
            load_bucket_sidecar(&mut t, sidecar).map_err(data(sidecar))?;
        }
        t
    };
    table.set_mode(mode);
    Ok(Some(table))
}

/// Runs a whole training job: echoes the resolved configuration and the
/// per-epoch log to `err`, and writes the model file plus `<model_out>.log`
/// when `model_out` is set.
pub fn train_from_config(cfg: &RunConfig, err: &mut dyn Write) -> Result<(SavedModel, TrainLog), CliError> {
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let train_path = cfg
        .train
        .as_deref()
        .ok_or_else(|| CliError::Usage("config has no train path".into()))?;
    let echo = cfg.echo();
    let _ = write!(err, "{echo}");
    let train = load_corpus(train_path, true)?;
    let valid = match &cfg.valid {
        Some(p) => load_corpus(p, true)?,
        None => Corpus::default(),
    };
    let embeddings = build_embeddings(cfg, &train)?;
    let (model, log) = match cfg.architecture() {
        None => {
            let (m, log) = train_crf(&train, &valid, &cfg.crf_config(), cfg.task, embeddings.as_ref())
                .map_err(|e| CliError::Data(e.to_string()))?;
            (SavedModel::Crf(m), log)
        }
        Some(arch) => {
            let table = embeddings.expect("validated config has embeddings");
            let (m, log) = train_neural(&train, &valid, arch, table, &cfg.neural_config())
                .map_err(|e| CliError::Data(e.to_string()))?;
            (SavedModel::Neural(m), log)
        }
    };
    for w in &log.warnings {
        let _ = writeln!(err, "warning: {w}");
    }
    let lines = log.lines();
    let _ = write!(err, "{lines}");
    if let Some(path) = &cfg.model_out {
        model.save(&echo, path).map_err(data(path))?;
        let mut log_path = path.clone().into_os_string();
        log_path.push(".log");
        fs::write(&log_path, format!("{echo}{lines}")).map_err(data(path))?;
    }
    Ok((model, log))
}
