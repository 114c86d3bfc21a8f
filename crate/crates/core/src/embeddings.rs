//! Word vectors with hashed character n-gram buckets.
//!
//! A word's representation is the mean of its lexical vector (when the word
//! is in the vocabulary) and the bucket vectors of its character n-grams.
//! Words with neither fall back to a fixed UNK vector, the mean of all
//! vocabulary vectors at construction time.

use std::collections::HashMap;
use std::io::BufRead;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Bucket count of the reference subword models.
pub const PRETRAINED_BUCKET_COUNT: usize = 2_000_000;
/// Bucket count used for small in-memory tables.
pub const DESK_BUCKET_COUNT: usize = 50_000;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("line {line}: duplicate word {word:?}")]
    DuplicateWord { line: usize, word: String },
    #[error("vector dimension {found} does not match configured dimension {expected}")]
    DimMismatch { expected: usize, found: usize },
    #[error("cannot build character n-grams of an empty word")]
    EmptyWord,
    #[error("invalid embedding configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// How a table takes part in training.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EmbeddingMode {
    /// Randomly initialized and trained.
    Random,
    /// Pretrained and kept fixed.
    Frozen,
    /// Pretrained and updated during training.
    Finetuned,
}

impl EmbeddingMode {
    pub fn is_trainable(self) -> bool {
        !matches!(self, EmbeddingMode::Frozen)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EmbeddingMode::Random => "random",
            EmbeddingMode::Frozen => "frozen",
            EmbeddingMode::Finetuned => "finetuned",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "random" => Some(EmbeddingMode::Random),
            "frozen" => Some(EmbeddingMode::Frozen),
            "finetuned" => Some(EmbeddingMode::Finetuned),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingConfig {
    pub dim: usize,
    pub min_n: usize,
    pub max_n: usize,
    pub bucket_count: usize,
    pub seed: u64,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            dim: 300,
            min_n: 3,
            max_n: 6,
            bucket_count: DESK_BUCKET_COUNT,
            seed: 0,
        }
    }
}

impl EmbeddingConfig {
    pub fn validate(&self) -> Result<(), EmbeddingError> {
        if self.dim == 0 {
            return Err(EmbeddingError::Config("dim must be at least 1".into()));
        }
        if self.min_n == 0 || self.min_n > self.max_n {
            return Err(EmbeddingError::Config(format!(
                "n-gram bounds must satisfy 1 <= min_n <= max_n, got {}..{}",
                self.min_n, self.max_n
            )));
        }
        Ok(())
    }
}

/// A row of trainable embedding storage.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EmbRow {
    Word(usize),
    Bucket(usize),
}

/// Character n-grams of `word` wrapped in `<` and `>`, ordered by start
/// position then length. The full wrapped word itself is excluded.
pub fn char_ngrams(word: &str, min_n: usize, max_n: usize) -> Result<Vec<String>, EmbeddingError> {
    if word.is_empty() {
        return Err(EmbeddingError::EmptyWord);
    }
    let wrapped: Vec<char> = std::iter::once('<')
        .chain(word.chars())
        .chain(std::iter::once('>'))
        .collect();
    let len = wrapped.len();
    let mut out = Vec::new();
    for start in 0..len {
        for n in min_n..=max_n {
            if start + n > len {
                break;
            }
            if n == len {
                continue;
            }
            out.push(wrapped[start..start + n].iter().collect());
        }
    }
    Ok(out)
}

/// 32-bit FNV-1a.
pub fn fnv1a32(bytes: &[u8]) -> u32 {
    let mut hash: u32 = 0x811c_9dc5;
    for &b in bytes {
        hash ^= u32::from(b);
        hash = hash.wrapping_mul(0x0100_0193);
    }
    hash
}

pub fn hash_ngram(ngram: &str, bucket_count: usize) -> usize {
    debug_assert!(bucket_count >= 1);
    fnv1a32(ngram.as_bytes()) as usize % bucket_count
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    words: Vec<String>,
    vocab: HashMap<String, usize>,
    word_vectors: Vec<f64>,
    /// `bucket_count x dim`; empty when subword composition is disabled.
    buckets: Vec<f64>,
    min_n: usize,
    max_n: usize,
    bucket_count: usize,
    subword: bool,
    mode: EmbeddingMode,
    unk: Vec<f64>,
}

fn mean_rows(data: &[f64], dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    let rows = data.len() / dim;
    if rows == 0 {
        return out;
    }
    for row in data.chunks_exact(dim) {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
    for o in &mut out {
        *o /= rows as f64;
    }
    out
}

impl EmbeddingTable {
    /// Assembles a table from its parts. `buckets` must be empty (subword
    /// composition disabled) or hold `bucket_count * dim` values.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        dim: usize,
        words: Vec<String>,
        word_vectors: Vec<f64>,
        buckets: Vec<f64>,
        min_n: usize,
        max_n: usize,
        bucket_count: usize,
        mode: EmbeddingMode,
        unk: Vec<f64>,
    ) -> Result<Self, EmbeddingError> {
        if dim == 0 || word_vectors.len() != words.len() * dim || unk.len() != dim {
            return Err(EmbeddingError::Config("inconsistent table shapes".into()));
        }
        let subword = !buckets.is_empty();
        if subword && (bucket_count == 0 || buckets.len() != bucket_count * dim) {
            return Err(EmbeddingError::Config("inconsistent bucket shape".into()));
        }
        if subword && (min_n == 0 || min_n > max_n) {
            return Err(EmbeddingError::Config("invalid n-gram bounds".into()));
        }
        let mut vocab = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if vocab.insert(w.clone(), i).is_some() {
                return Err(EmbeddingError::DuplicateWord {
                    line: i + 1,
                    word: w.clone(),
                });
            }
        }
        Ok(EmbeddingTable {
            dim,
            words,
            vocab,
            word_vectors,
            buckets,
            min_n,
            max_n,
            bucket_count,
            subword,
            mode,
            unk,
        })
    }

    /// Reads the word2vec/fastText text format: a `count dim` header, then
    /// one `word v1 .. v_dim` row per word. Subword composition is disabled;
    /// see [`EmbeddingTable::enable_subword`].
    pub fn load_text_vectors<R: BufRead>(
        reader: R,
        config: &EmbeddingConfig,
    ) -> Result<Self, EmbeddingError> {
        config.validate()?;
        let mut lines = reader.lines();
        let header = lines.next().transpose()?.ok_or(EmbeddingError::Format {
            line: 1,
            message: "missing header".into(),
        })?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        let parse_header = |s: &str| {
            s.parse::<usize>().map_err(|_| EmbeddingError::Format {
                line: 1,
                message: format!("bad header field {s:?}"),
            })
        };
        if parts.len() != 2 {
            return Err(EmbeddingError::Format {
                line: 1,
                message: format!("header must be \"count dim\", got {header:?}"),
            });
        }
        let count = parse_header(parts[0])?;
        let dim = parse_header(parts[1])?;
        if dim != config.dim {
            return Err(EmbeddingError::DimMismatch {
                expected: config.dim,
                found: dim,
            });
        }
        let mut words = Vec::with_capacity(count);
        let mut vocab = HashMap::with_capacity(count);
        let mut word_vectors = Vec::with_capacity(count * dim);
        for (i, line) in lines.enumerate() {
            let line_no = i + 2;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            if words.len() == count {
                return Err(EmbeddingError::Format {
                    line: line_no,
                    message: format!("more than {count} rows"),
                });
            }
            let mut fields = line.split(' ').filter(|f| !f.is_empty());
            let word = fields.next().unwrap_or_default().to_string();
            let values: Vec<&str> = fields.collect();
            if values.len() != dim {
                return Err(EmbeddingError::Format {
                    line: line_no,
                    message: format!("expected {dim} values, found {}", values.len()),
                });
            }
            for v in values {
                let x = v.parse::<f64>().map_err(|_| EmbeddingError::Format {
                    line: line_no,
                    message: format!("bad float {v:?}"),
                })?;
                word_vectors.push(x);
            }
            if vocab.insert(word.clone(), words.len()).is_some() {
                return Err(EmbeddingError::DuplicateWord {
                    line: line_no,
                    word,
                });
            }
            words.push(word);
        }
        if words.len() != count {
            return Err(EmbeddingError::Format {
                line: count + 1,
                message: format!("header announces {count} rows, found {}", words.len()),
            });
        }
        let unk = mean_rows(&word_vectors, dim);
        Ok(EmbeddingTable {
            dim,
            words,
            vocab,
            word_vectors,
            buckets: Vec::new(),
            min_n: config.min_n,
            max_n: config.max_n,
            bucket_count: config.bucket_count,
            subword: false,
            mode: EmbeddingMode::Frozen,
            unk,
        })
    }

    /// Draws word and bucket vectors uniformly from `[-0.5/dim, 0.5/dim)`
    /// with a generator seeded from `config.seed`.
    pub fn init_random(vocab: &[String], config: &EmbeddingConfig) -> Result<Self, EmbeddingError> {
        config.validate()?;
        if vocab.is_empty() {
            return Err(EmbeddingError::Config("vocabulary is empty".into()));
        }
        if config.bucket_count == 0 {
            return Err(EmbeddingError::Config("bucket_count must be at least 1".into()));
        }
        let dim = config.dim;
        let bound = 0.5 / dim as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.gen_range(-bound..bound)).collect() };
        let word_vectors = draw(vocab.len() * dim);
        let buckets = draw(config.bucket_count * dim);
        let unk = mean_rows(&word_vectors, dim);
        Self::from_parts(
            dim,
            vocab.to_vec(),
            word_vectors,
            buckets,
            config.min_n,
            config.max_n,
            config.bucket_count,
            EmbeddingMode::Random,
            unk,
        )
    }

    /// Turns on subword composition with the given bucket matrix, or zero
    /// buckets when `buckets` is `None`.
    pub fn enable_subword(
        &mut self,
        buckets: Option<Vec<f64>>,
        min_n: usize,
        max_n: usize,
        bucket_count: usize,
    ) -> Result<(), EmbeddingError> {
        if bucket_count == 0 || min_n == 0 || min_n > max_n {
            return Err(EmbeddingError::Config("invalid subword settings".into()));
        }
        let buckets = buckets.unwrap_or_else(|| vec![0.0; bucket_count * self.dim]);
        if buckets.len() != bucket_count * self.dim {
            return Err(EmbeddingError::DimMismatch {
                expected: bucket_count * self.dim,
                found: buckets.len(),
            });
        }
        self.buckets = buckets;
        self.min_n = min_n;
        self.max_n = max_n;
        self.bucket_count = bucket_count;
        self.subword = true;
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mode(&self) -> EmbeddingMode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: EmbeddingMode) {
        self.mode = mode;
    }

    pub fn subword_enabled(&self) -> bool {
        self.subword
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn word_index(&self, word: &str) -> Option<usize> {
        self.vocab.get(word).copied()
    }

    pub fn word_vectors(&self) -> &[f64] {
        &self.word_vectors
    }

    pub fn buckets(&self) -> &[f64] {
        &self.buckets
    }

    pub fn unk(&self) -> &[f64] {
        &self.unk
    }

    pub fn ngram_bounds(&self) -> (usize, usize) {
        (self.min_n, self.max_n)
    }

    pub fn bucket_count(&self) -> usize {
        self.bucket_count
    }

    /// Storage rows averaged to form `word`'s vector, duplicates kept. An
    /// empty result means the word maps to the UNK vector.
    pub fn components(&self, word: &str) -> Vec<EmbRow> {
        let mut rows = Vec::new();
        if let Some(&i) = self.vocab.get(word) {
            rows.push(EmbRow::Word(i));
        }
        if self.subword && !word.is_empty() {
            let grams = char_ngrams(word, self.min_n, self.max_n).unwrap_or_default();
            rows.extend(
                grams
                    .iter()
                    .map(|g| EmbRow::Bucket(hash_ngram(g, self.bucket_count))),
            );
        }
        rows
    }

    pub fn row(&self, row: EmbRow) -> &[f64] {
        let d = self.dim;
        match row {
            EmbRow::Word(i) => &self.word_vectors[i * d..(i + 1) * d],
            EmbRow::Bucket(b) => &self.buckets[b * d..(b + 1) * d],
        }
    }

    pub fn row_mut(&mut self, row: EmbRow) -> &mut [f64] {
        let d = self.dim;
        match row {
            EmbRow::Word(i) => &mut self.word_vectors[i * d..(i + 1) * d],
            EmbRow::Bucket(b) => &mut self.buckets[b * d..(b + 1) * d],
        }
    }

    /// Vector for `word`, composed from its storage rows.
    pub fn embed(&self, word: &str) -> Vec<f64> {
        self.embed_rows(&self.components(word))
    }

    pub fn embed_rows(&self, rows: &[EmbRow]) -> Vec<f64> {
        if rows.is_empty() {
            return self.unk.clone();
        }
        let mut out = vec![0.0; self.dim];
        for &r in rows {
            for (o, v) in out.iter_mut().zip(self.row(r)) {
                *o += v;
            }
        }
        let scale = 1.0 / rows.len() as f64;
        for o in &mut out {
            *o *= scale;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_ngrams(word: &str, min_n: usize, max_n: usize) -> Vec<String> {
        let chars: Vec<char> = format!("<{word}>").chars().collect();
        let mut out = Vec::new();
        for i in 0..chars.len() {
            for j in i + 1..=chars.len() {
                let n = j - i;
                if n >= min_n && n <= max_n && n != chars.len() {
                    out.push(chars[i..j].iter().collect::<String>());
                }
            }
        }
        out
    }

    #[test]
    fn ngram_examples() {
        assert_eq!(char_ngrams("ab", 3, 3).unwrap(), vec!["<ab", "ab>"]);
        assert!(char_ngrams("a", 3, 3).unwrap().is_empty());
        assert!(matches!(char_ngrams("", 3, 6), Err(EmbeddingError::EmptyWord)));
    }

    #[test]
    fn ngrams_of_burmese_word_match_enumeration() {
        let word = "ကောလိ";
        assert_eq!(word.chars().count(), 5);
        let word4: String = word.chars().take(4).collect();
        assert_eq!(char_ngrams(&word4, 3, 4).unwrap(), brute_ngrams(&word4, 3, 4));
        assert_eq!(char_ngrams(word, 3, 6).unwrap(), brute_ngrams(word, 3, 6));
    }

    #[test]
    fn ngram_count_formula() {
        for len in 1..9usize {
            let word: String = "abcdefghij".chars().take(len).collect();
            for (min_n, max_n) in [(1, 1), (3, 6), (2, 4), (1, 12)] {
                let wrapped = len + 2;
                let mut expected: usize = (min_n..=max_n)
                    .map(|n| (wrapped + 1).saturating_sub(n))
                    .sum();
                if (min_n..=max_n).contains(&wrapped) {
                    expected -= 1;
                }
                assert_eq!(char_ngrams(&word, min_n, max_n).unwrap().len(), expected);
            }
        }
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a32(b""), 0x811c_9dc5);
        assert_eq!(fnv1a32(b"a"), 0xE40C_292C);
        assert_eq!(fnv1a32(b"foobar"), 0xBF9C_F968);
        assert_eq!(hash_ngram("<ab", 1), 0);
        assert_eq!(hash_ngram("a", 7), 0xE40C_292C % 7);
    }

    #[test]
    fn load_small_file() {
        let cfg = EmbeddingConfig {
            dim: 3,
            ..Default::default()
        };
        let t = EmbeddingTable::load_text_vectors("2 3\na 1 0 0\nb 0 1 0\n".as_bytes(), &cfg).unwrap();
        assert_eq!(t.word_index("a"), Some(0));
        assert_eq!(t.word_index("b"), Some(1));
        assert_eq!(t.embed("a"), vec![1.0, 0.0, 0.0]);
        assert_eq!(t.embed("zzz"), vec![0.5, 0.5, 0.0]);
        assert_eq!(t.mode(), EmbeddingMode::Frozen);
    }

    #[test]
    fn load_errors() {
        let cfg = EmbeddingConfig {
            dim: 3,
            ..Default::default()
        };
        let load = |s: &str| EmbeddingTable::load_text_vectors(s.as_bytes(), &cfg);
        assert!(matches!(
            load("2 3\na 1 0 0\nb 0 1\n"),
            Err(EmbeddingError::Format { line: 3, .. })
        ));
        assert!(matches!(
            load("2 3\na 1 0 0\na 0 1 0\n"),
            Err(EmbeddingError::DuplicateWord { line: 3, .. })
        ));
        assert!(matches!(
            load("1 4\na 1 0 0 0\n"),
            Err(EmbeddingError::DimMismatch { expected: 3, found: 4 })
        ));
        assert!(matches!(load("2\n"), Err(EmbeddingError::Format { line: 1, .. })));
        assert!(matches!(load("2 3\na 1 0 0\n"), Err(EmbeddingError::Format { .. })));
        assert!(matches!(load("1 3\na 1 x 0\n"), Err(EmbeddingError::Format { line: 2, .. })));
    }

    #[test]
    fn zero_vector_row_loads_verbatim() {
        let mut text = String::from("10 4\n");
        let mut expected = Vec::new();
        for i in 0..10 {
            let row: Vec<f64> = if i == 6 {
                vec![0.0; 4]
            } else {
                (0..4).map(|k| (i * 4 + k) as f64 * 0.25 - 3.0).collect()
            };
            text.push_str(&format!("w{i}"));
            for v in &row {
                text.push_str(&format!(" {v}"));
            }
            text.push('\n');
            expected.push(row);
        }
        let cfg = EmbeddingConfig {
            dim: 4,
            ..Default::default()
        };
        let t = EmbeddingTable::load_text_vectors(text.as_bytes(), &cfg).unwrap();
        for (i, row) in expected.iter().enumerate() {
            assert_eq!(&t.embed(&format!("w{i}")), row);
        }
        assert_eq!(t.embed("w6"), vec![0.0; 4]);
    }

    #[test]
    fn composition_rules() {
        let cfg = EmbeddingConfig {
            dim: 2,
            ..Default::default()
        };
        let mut t = EmbeddingTable::load_text_vectors("1 2\nabc 3 6\n".as_bytes(), &cfg).unwrap();
        t.enable_subword(None, 3, 6, 16).unwrap();
        let g = char_ngrams("abc", 3, 6).unwrap().len() as f64;
        let v = t.embed("abc");
        assert_eq!(v, vec![3.0 / (1.0 + g), 6.0 / (1.0 + g)]);
        assert_eq!(t.embed("xyz"), vec![0.0, 0.0]);
        // single character words have no n-grams at min_n = 3
        assert_eq!(t.embed("q"), t.unk().to_vec());
    }

    #[test]
    fn oov_is_mean_of_bucket_vectors() {
        let vocab: Vec<String> = ["alpha", "beta"].iter().map(|s| s.to_string()).collect();
        let cfg = EmbeddingConfig {
            dim: 5,
            bucket_count: 97,
            seed: 11,
            ..Default::default()
        };
        let t = EmbeddingTable::init_random(&vocab, &cfg).unwrap();
        let word = "gamma";
        let grams = char_ngrams(word, 3, 6).unwrap();
        let mut expected = [0.0; 5];
        for g in &grams {
            let b = (fnv1a32(g.as_bytes()) % 97) as usize;
            for k in 0..5 {
                expected[k] += t.buckets()[b * 5 + k];
            }
        }
        let got = t.embed(word);
        for k in 0..5 {
            assert!((got[k] - expected[k] / grams.len() as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn random_init_is_seeded_and_bounded() {
        let vocab: Vec<String> = (0..20).map(|i| format!("w{i}")).collect();
        let cfg = EmbeddingConfig {
            dim: 300,
            bucket_count: 10,
            seed: 3,
            ..Default::default()
        };
        let a = EmbeddingTable::init_random(&vocab, &cfg).unwrap();
        let b = EmbeddingTable::init_random(&vocab, &cfg).unwrap();
        assert_eq!(a, b);
        let bound = 0.5 / 300.0;
        assert!(a.word_vectors().iter().chain(a.buckets()).all(|v| v.abs() <= bound));
        assert_eq!(a.word_vectors().len(), 20 * 300);
        let dup = vec!["x".to_string(), "x".to_string()];
        assert!(matches!(
            EmbeddingTable::init_random(&dup, &cfg),
            Err(EmbeddingError::DuplicateWord { .. })
        ));
    }

    #[test]
    fn random_init_mean_is_centered() {
        let vocab: Vec<String> = (0..1000).map(|i| format!("w{i}")).collect();
        let cfg = EmbeddingConfig {
            dim: 50,
            bucket_count: 1,
            seed: 99,
            ..Default::default()
        };
        let t = EmbeddingTable::init_random(&vocab, &cfg).unwrap();
        let xs = t.word_vectors();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        // uniform on [-a, a): variance a^2/3
        let a = 0.5 / 50.0;
        let sigma = (a * a / 3.0 / n).sqrt();
        assert!(mean.abs() < 3.0 * sigma, "mean {mean} sigma {sigma}");
    }
}
