//! Binary model files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "SEQL"  u32 version  str kind  str config  u32 sections
//! section: str name, u8 type, payload
//!   type 0 (floats):  u32 rank, u64 dims[rank], f64 values[prod(dims)]
//!   type 1 (strings): u64 count, str items[count]
//! str: u32 byte length, UTF-8 bytes
//! ```
//!
//! Sections are written in a fixed order, so saving a loaded model
//! reproduces the original bytes.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use thiserror::Error;

use crate::corpus::{NerLabel, PosTag};
use crate::crf::{CrfError, CrfLabel, CrfModel, FeatureConfig, Task};
use crate::embeddings::{EmbeddingMode, EmbeddingTable};
use crate::matrix::Matrix;
use crate::neural::{Head, Inference, LstmParams, Network, NeuralTagger};

pub const MAGIC: &[u8; 4] = b"SEQL";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("not a model file (bad magic)")]
    NotAModelFile,
    #[error("model format version {found} is not supported (this build reads version {supported})")]
    Version { found: u32, supported: u32 },
    #[error("truncated model file while reading {0}")]
    Truncated(String),
    #[error("malformed model file: {0}")]
    Format(String),
    #[error("model file has no section {0:?}")]
    Missing(String),
    #[error("expected a {expected} model, found {found}")]
    Kind { expected: String, found: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Section {
    Floats { shape: Vec<usize>, data: Vec<f64> },
    Strings(Vec<String>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelFile {
    pub kind: String,
    pub config: String,
    pub sections: Vec<(String, Section)>,
}

fn write_str<W: Write>(w: &mut W, s: &str) -> io::Result<()> {
    w.write_u32::<LittleEndian>(s.len() as u32)?;
    w.write_all(s.as_bytes())
}

fn truncated(what: &str) -> impl Fn(io::Error) -> PersistError + '_ {
    move |e| {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            PersistError::Truncated(what.to_string())
        } else {
            PersistError::Io(e)
        }
    }
}

fn read_str<R: Read>(r: &mut R, what: &str) -> Result<String, PersistError> {
    let len = r.read_u32::<LittleEndian>().map_err(truncated(what))? as usize;
    let mut buf = Vec::new();
    r.take(len as u64).read_to_end(&mut buf)?;
    if buf.len() != len {
        return Err(PersistError::Truncated(what.to_string()));
    }
    String::from_utf8(buf).map_err(|_| PersistError::Format(format!("{what} is not UTF-8")))
}

impl ModelFile {
    pub fn new(kind: &str, config: &str) -> Self {
        ModelFile {
            kind: kind.to_string(),
            config: config.to_string(),
            sections: Vec::new(),
        }
    }

    pub fn push_floats(&mut self, name: &str, shape: &[usize], data: &[f64]) {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        self.sections.push((
            name.to_string(),
            Section::Floats {
                shape: shape.to_vec(),
                data: data.to_vec(),
            },
        ));
    }

    pub fn push_matrix(&mut self, name: &str, m: &Matrix) {
        self.push_floats(name, &[m.rows(), m.cols()], m.as_slice());
    }

    pub fn push_strings<S: AsRef<str>>(&mut self, name: &str, items: &[S]) {
        self.sections.push((
            name.to_string(),
            Section::Strings(items.iter().map(|s| s.as_ref().to_string()).collect()),
        ));
    }

    fn section(&self, name: &str) -> Result<&Section, PersistError> {
        self.sections
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, s)| s)
            .ok_or_else(|| PersistError::Missing(name.to_string()))
    }

    pub fn has(&self, name: &str) -> bool {
        self.sections.iter().any(|(n, _)| n == name)
    }

    pub fn floats(&self, name: &str) -> Result<(&[usize], &[f64]), PersistError> {
        match self.section(name)? {
            Section::Floats { shape, data } => Ok((shape, data)),
            Section::Strings(_) => Err(PersistError::Format(format!("{name} is not a float block"))),
        }
    }

    pub fn matrix(&self, name: &str) -> Result<Matrix, PersistError> {
        match self.floats(name)? {
            (&[r, c], data) => Ok(Matrix::from_vec(r, c, data.to_vec())),
            _ => Err(PersistError::Format(format!("{name} is not a matrix"))),
        }
    }

    pub fn vector(&self, name: &str) -> Result<Vec<f64>, PersistError> {
        match self.floats(name)? {
            (&[_], data) => Ok(data.to_vec()),
            _ => Err(PersistError::Format(format!("{name} is not a vector"))),
        }
    }

    pub fn strings(&self, name: &str) -> Result<&[String], PersistError> {
        match self.section(name)? {
            Section::Strings(s) => Ok(s),
            Section::Floats { .. } => Err(PersistError::Format(format!("{name} is not a string list"))),
        }
    }

    /// Value of `key` in a string list of `key=value` entries.
    fn setting(&self, section: &str, key: &str) -> Result<String, PersistError> {
        self.strings(section)?
            .iter()
            .find_map(|s| s.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
            .map(str::to_string)
            .ok_or_else(|| PersistError::Missing(format!("{section}.{key}")))
    }

    fn parsed<T: std::str::FromStr>(&self, section: &str, key: &str) -> Result<T, PersistError> {
        let raw = self.setting(section, key)?;
        raw.parse()
            .map_err(|_| PersistError::Format(format!("bad value {raw:?} for {section}.{key}")))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(FORMAT_VERSION)?;
        write_str(w, &self.kind)?;
        write_str(w, &self.config)?;
        w.write_u32::<LittleEndian>(self.sections.len() as u32)?;
        for (name, section) in &self.sections {
            write_str(w, name)?;
            match section {
                Section::Floats { shape, data } => {
                    w.write_u8(0)?;
                    w.write_u32::<LittleEndian>(shape.len() as u32)?;
                    for &d in shape {
                        w.write_u64::<LittleEndian>(d as u64)?;
                    }
                    for &v in data {
                        w.write_f64::<LittleEndian>(v)?;
                    }
                }
                Section::Strings(items) => {
                    w.write_u8(1)?;
                    w.write_u64::<LittleEndian>(items.len() as u64)?;
                    for s in items {
                        write_str(w, s)?;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, PersistError> {
        let mut r = bytes;
        let mut magic = [0u8; 4];
        if r.read_exact(&mut magic).is_err() || &magic != MAGIC {
            return Err(PersistError::NotAModelFile);
        }
        let version = r.read_u32::<LittleEndian>().map_err(truncated("version"))?;
        if version != FORMAT_VERSION {
            return Err(PersistError::Version {
                found: version,
                supported: FORMAT_VERSION,
            });
        }
        let kind = read_str(&mut r, "kind")?;
        let config = read_str(&mut r, "config")?;
        let count = r.read_u32::<LittleEndian>().map_err(truncated("section count"))?;
        let mut sections = Vec::new();
        for _ in 0..count {
            let name = read_str(&mut r, "section name")?;
            let tag = r.read_u8().map_err(truncated(&name))?;
            let section = match tag {
                0 => {
                    let rank = r.read_u32::<LittleEndian>().map_err(truncated(&name))? as usize;
                    let mut shape = Vec::with_capacity(rank.min(8));
                    for _ in 0..rank {
                        shape.push(r.read_u64::<LittleEndian>().map_err(truncated(&name))? as usize);
                    }
                    let n = shape
                        .iter()
                        .try_fold(1usize, |a, &d| a.checked_mul(d))
                        .ok_or_else(|| PersistError::Format(format!("{name}: shape overflows")))?;
                    if n.checked_mul(8).is_none_or(|b| b > r.len()) {
                        return Err(PersistError::Truncated(name));
                    }
                    let mut data = vec![0.0; n];
                    r.read_f64_into::<LittleEndian>(&mut data).map_err(truncated(&name))?;
                    Section::Floats { shape, data }
                }
                1 => {
                    let n = r.read_u64::<LittleEndian>().map_err(truncated(&name))? as usize;
                    if n.checked_mul(4).is_none_or(|b| b > r.len()) {
                        return Err(PersistError::Truncated(name));
                    }
                    let mut items = Vec::with_capacity(n);
                    for _ in 0..n {
                        items.push(read_str(&mut r, &name)?);
                    }
                    Section::Strings(items)
                }
                t => return Err(PersistError::Format(format!("{name}: unknown section type {t}"))),
            };
            sections.push((name, section));
        }
        if !r.is_empty() {
            return Err(PersistError::Format(format!("{} trailing bytes", r.len())));
        }
        Ok(ModelFile {
            kind,
            config,
            sections,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), PersistError> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, PersistError> {
        Self::from_bytes(&fs::read(path)?)
    }
}

fn push_embeddings(f: &mut ModelFile, prefix: &str, t: &EmbeddingTable) {
    let (min_n, max_n) = t.ngram_bounds();
    f.push_strings(
        &format!("{prefix}.settings"),
        &[
            format!("mode={}", t.mode().as_str()),
            format!("min_n={min_n}"),
            format!("max_n={max_n}"),
            format!("bucket_count={}", t.bucket_count()),
        ],
    );
    f.push_strings(&format!("{prefix}.words"), t.words());
    f.push_floats(&format!("{prefix}.vectors"), &[t.words().len(), t.dim()], t.word_vectors());
    f.push_floats(
        &format!("{prefix}.buckets"),
        &[t.buckets().len() / t.dim(), t.dim()],
        t.buckets(),
    );
    f.push_floats(&format!("{prefix}.unk"), &[t.dim()], t.unk());
}

fn read_embeddings(f: &ModelFile, prefix: &str) -> Result<EmbeddingTable, PersistError> {
    let settings = format!("{prefix}.settings");
    let mode_name = f.setting(&settings, "mode")?;
    let mode = EmbeddingMode::parse(&mode_name)
        .ok_or_else(|| PersistError::Format(format!("unknown embedding mode {mode_name:?}")))?;
    let (vshape, vectors) = f.floats(&format!("{prefix}.vectors"))?;
    let dim = *vshape
        .get(1)
        .ok_or_else(|| PersistError::Format("embedding vectors are not a matrix".into()))?;
    let (_, buckets) = f.floats(&format!("{prefix}.buckets"))?;
    EmbeddingTable::from_parts(
        dim,
        f.strings(&format!("{prefix}.words"))?.to_vec(),
        vectors.to_vec(),
        buckets.to_vec(),
        f.parsed(&settings, "min_n")?,
        f.parsed(&settings, "max_n")?,
        f.parsed(&settings, "bucket_count")?,
        mode,
        f.vector(&format!("{prefix}.unk"))?,
    )
    .map_err(|e| PersistError::Format(e.to_string()))
}

/// Writes the bucket matrix of a table as a standalone file, for use next
/// to a text vector file.
pub fn save_bucket_sidecar(table: &EmbeddingTable, path: &Path) -> Result<(), PersistError> {
    if !table.subword_enabled() {
        return Err(PersistError::Format("table has no bucket matrix".into()));
    }
    let (min_n, max_n) = table.ngram_bounds();
    let mut f = ModelFile::new("buckets", "");
    f.push_strings("settings", &[format!("min_n={min_n}"), format!("max_n={max_n}")]);
    f.push_floats("buckets", &[table.bucket_count(), table.dim()], table.buckets());
    f.save(path)
}

/// Loads a bucket sidecar and enables subword composition on `table`.
pub fn load_bucket_sidecar(table: &mut EmbeddingTable, path: &Path) -> Result<(), PersistError> {
    let f = ModelFile::load(path)?;
    if f.kind != "buckets" {
        return Err(PersistError::Kind {
            expected: "buckets".into(),
            found: f.kind,
        });
    }
    let (shape, data) = f.floats("buckets")?;
    let (rows, dim) = match shape {
        &[r, d] => (r, d),
        _ => return Err(PersistError::Format("buckets is not a matrix".into())),
    };
    if dim != table.dim() {
        return Err(PersistError::Format(format!(
            "bucket dim {dim} does not match vector dim {}",
            table.dim()
        )));
    }
    table
        .enable_subword(
            Some(data.to_vec()),
            f.parsed("settings", "min_n")?,
            f.parsed("settings", "max_n")?,
            rows,
        )
        .map_err(|e| PersistError::Format(e.to_string()))
}

/// A trained tagger of any kind.
#[derive(Clone, Debug, PartialEq)]
pub enum SavedModel {
    Crf(CrfModel),
    Neural(NeuralTagger),
}

impl SavedModel {
    pub fn kind(&self) -> &'static str {
        match self {
            SavedModel::Crf(_) => "crf",
            SavedModel::Neural(n) => match n.inference {
                Inference::Softmax => "bilstm-softmax",
                Inference::Crf => "bilstm-crf",
            },
        }
    }

    pub fn task(&self) -> Task {
        match self {
            SavedModel::Crf(m) => m.task(),
            SavedModel::Neural(n) => n.task,
        }
    }

    /// Predicted NER labels, plus POS tags for joint neural models.
    pub fn tag(&self, surfaces: &[&str]) -> Result<(Vec<NerLabel>, Option<Vec<PosTag>>), CrfError> {
        match self {
            SavedModel::Crf(m) => Ok((m.tag(surfaces)?, None)),
            SavedModel::Neural(n) => {
                if surfaces.is_empty() {
                    return Err(CrfError::EmptySequence);
                }
                let p = n.tag(surfaces);
                Ok((p.ner, p.pos))
            }
        }
    }

    pub fn to_file(&self, config: &str) -> ModelFile {
        let mut f = ModelFile::new(self.kind(), config);
        match self {
            SavedModel::Crf(m) => {
                f.push_strings(
                    "crf.settings",
                    &[
                        format!("task={}", m.task().as_str()),
                        format!("use_embeddings={}", m.feature_config().use_embeddings),
                        format!("trained_on={}", m.trained_on),
                    ],
                );
                let labels: Vec<String> = m.labels().iter().map(|l| l.to_string()).collect();
                f.push_strings("crf.labels", &labels);
                f.push_strings("crf.features", m.feature_names());
                f.push_matrix("crf.state_weights", m.state_weights());
                f.push_matrix("crf.transitions", m.transitions());
                if let Some(t) = m.embeddings() {
                    push_embeddings(&mut f, "emb", t);
                }
            }
            SavedModel::Neural(n) => {
                let net = &n.network;
                f.push_strings(
                    "net.settings",
                    &[
                        format!("task={}", n.task.as_str()),
                        format!("heads={}", net.heads.len()),
                    ],
                );
                f.push_floats("net.dropout", &[1], &[net.dropout]);
                push_embeddings(&mut f, "emb", &net.embedding);
                for (name, p) in [("fwd", &net.fwd), ("bwd", &net.bwd)] {
                    f.push_matrix(&format!("{name}.w"), &p.w);
                    f.push_matrix(&format!("{name}.u"), &p.u);
                    f.push_floats(&format!("{name}.b"), &[p.b.len()], &p.b);
                }
                for (i, h) in net.heads.iter().enumerate() {
                    f.push_matrix(&format!("head{i}.proj"), &h.proj);
                    f.push_floats(&format!("head{i}.bias"), &[h.bias.len()], &h.bias);
                    if let Some(t) = &h.transitions {
                        f.push_matrix(&format!("head{i}.transitions"), t);
                    }
                }
            }
        }
        f
    }

    pub fn from_file(f: &ModelFile) -> Result<Self, PersistError> {
        let task_of = |section: &str| -> Result<Task, PersistError> {
            let raw = f.setting(section, "task")?;
            Task::parse(&raw).ok_or_else(|| PersistError::Format(format!("unknown task {raw:?}")))
        };
        let inference = match f.kind.as_str() {
            "crf" => None,
            "bilstm-softmax" => Some(Inference::Softmax),
            "bilstm-crf" => Some(Inference::Crf),
            other => {
                return Err(PersistError::Kind {
                    expected: "crf, bilstm-softmax or bilstm-crf".into(),
                    found: other.to_string(),
                })
            }
        };
        let Some(inference) = inference else {
            let labels = f
                .strings("crf.labels")?
                .iter()
                .map(|s| CrfLabel::parse(s).ok_or_else(|| PersistError::Format(format!("bad label {s:?}"))))
                .collect::<Result<Vec<_>, _>>()?;
            let use_embeddings: bool = f.parsed("crf.settings", "use_embeddings")?;
            let embeddings = if f.has("emb.settings") {
                Some(read_embeddings(f, "emb")?)
            } else {
                None
            };
            let model = CrfModel::from_parts(
                task_of("crf.settings")?,
                labels,
                f.strings("crf.features")?.to_vec(),
                f.matrix("crf.state_weights")?,
                f.matrix("crf.transitions")?,
                FeatureConfig { use_embeddings },
                embeddings,
                f.setting("crf.settings", "trained_on")?,
            )
            .map_err(|e| PersistError::Format(e.to_string()))?;
            return Ok(SavedModel::Crf(model));
        };
        let lstm = |name: &str| -> Result<LstmParams, PersistError> {
            Ok(LstmParams {
                w: f.matrix(&format!("{name}.w"))?,
                u: f.matrix(&format!("{name}.u"))?,
                b: f.vector(&format!("{name}.b"))?,
            })
        };
        let heads_n: usize = f.parsed("net.settings", "heads")?;
        let mut heads = Vec::with_capacity(heads_n);
        for i in 0..heads_n {
            heads.push(Head {
                proj: f.matrix(&format!("head{i}.proj"))?,
                bias: f.vector(&format!("head{i}.bias"))?,
                transitions: match inference {
                    Inference::Crf => Some(f.matrix(&format!("head{i}.transitions"))?),
                    Inference::Softmax => None,
                },
            });
        }
        let dropout = f
            .vector("net.dropout")?
            .first()
            .copied()
            .ok_or_else(|| PersistError::Format("empty dropout block".into()))?;
        let network = Network {
            embedding: read_embeddings(f, "emb")?,
            fwd: lstm("fwd")?,
            bwd: lstm("bwd")?,
            heads,
            dropout,
        };
        network
            .check_shapes()
            .map_err(|e| PersistError::Format(e.to_string()))?;
        Ok(SavedModel::Neural(NeuralTagger {
            network,
            task: task_of("net.settings")?,
            inference,
        }))
    }

    pub fn save(&self, config: &str, path: &Path) -> Result<(), PersistError> {
        self.to_file(config).save(path)
    }

    /// The model and the configuration snapshot stored with it.
    pub fn load(path: &Path) -> Result<(Self, String), PersistError> {
        let f = ModelFile::load(path)?;
        Ok((Self::from_file(&f)?, f.config))
    }
}
