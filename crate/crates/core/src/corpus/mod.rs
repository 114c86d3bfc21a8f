//! CoNLL-style word / POS / NER corpora in the BIOES scheme.
//!
//! A corpus file holds one token per line as `surface<sep>pos<sep>ner`,
//! where the separator is a single tab or a run of spaces, and sentences are
//! separated by blank lines. Surfaces are kept exactly as written; no
//! Unicode normalization is applied.

mod bioes;
mod conll;
mod stats;
mod tags;

pub use bioes::{encode_spans, extract_entities, validate_bioes, Rule, Span, Violation};
pub use conll::{parse_conll, parse_surfaces, write_conll};
pub use stats::TagStats;
pub use tags::{EntityType, NerLabel, PosTag, Position, UnknownTag};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorpusError {
    #[error("line {line}: expected 3 fields (surface, pos, ner), found {found}")]
    Fields { line: usize, found: usize },
    #[error("line {line}: unknown POS tag {value:?}")]
    UnknownPos { line: usize, value: String },
    #[error("line {line}: unknown NER tag {value:?}")]
    UnknownNer { line: usize, value: String },
    #[error("sentence {sentence}: BIOES violation at position {position} ({rule})")]
    Validation {
        sentence: usize,
        position: usize,
        rule: Rule,
    },
    #[error("label sequence is not valid BIOES (first violation at position {position}); run validate_bioes first")]
    InvalidSequence { position: usize },
    #[error("invalid token surface {0:?}: must be non-empty without whitespace")]
    Surface(String),
    #[error("a sentence needs at least one token")]
    EmptySentence,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Token {
    surface: String,
    pub pos: PosTag,
    pub ner: NerLabel,
}

impl Token {
    pub fn new(surface: impl Into<String>, pos: PosTag, ner: NerLabel) -> Result<Self, CorpusError> {
        let surface = surface.into();
        if surface.is_empty() || surface.chars().any(|c| matches!(c, ' ' | '\t' | '\n' | '\r')) {
            return Err(CorpusError::Surface(surface));
        }
        Ok(Token { surface, pos, ner })
    }

    pub fn surface(&self) -> &str {
        &self.surface
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Sentence {
    tokens: Vec<Token>,
}

impl Sentence {
    pub fn new(tokens: Vec<Token>) -> Result<Self, CorpusError> {
        if tokens.is_empty() {
            return Err(CorpusError::EmptySentence);
        }
        Ok(Sentence { tokens })
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn surfaces(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.surface()).collect()
    }

    pub fn ner_labels(&self) -> Vec<NerLabel> {
        self.tokens.iter().map(|t| t.ner).collect()
    }

    pub fn pos_tags(&self) -> Vec<PosTag> {
        self.tokens.iter().map(|t| t.pos).collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Corpus {
    pub name: String,
    pub sentences: Vec<Sentence>,
}

impl Corpus {
    pub fn new(name: impl Into<String>, sentences: Vec<Sentence>) -> Self {
        Corpus {
            name: name.into(),
            sentences,
        }
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Sentence::len).sum()
    }

    /// Checks every sentence against the BIOES rules and reports the first
    /// violation found.
    pub fn validate(&self) -> Result<(), CorpusError> {
        for (i, s) in self.sentences.iter().enumerate() {
            if let Some(v) = validate_bioes(&s.ner_labels()).into_iter().next() {
                return Err(CorpusError::Validation {
                    sentence: i,
                    position: v.position,
                    rule: v.rule,
                });
            }
        }
        Ok(())
    }
}

pub fn tag_statistics(corpus: &Corpus) -> TagStats {
    TagStats::from_corpus(corpus)
}

/// The sample sentence used throughout the tests: "In Mandalay, there was a
/// subordinate Medical College of Yangon University".
pub const SAMPLE_CONLL: &str = "မန္တလေး\tn\tS-LOC
၌\tppm\tO
ရန်ကုန်\tn\tB-ORG
တက္ကသိုလ်\tn\tE-ORG
လက်အောက်ခံ\tn\tO
ဆေးအတတ်သင်\tn\tB-ORG
ကောလိပ်\tn\tE-ORG
ရှိ\tv\tO
ခဲ့\tpart\tO
သည်\tppm\tO
";

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn token_rejects_whitespace() {
        assert!(Token::new("a b", PosTag::N, NerLabel::Outside).is_err());
        assert!(Token::new("", PosTag::N, NerLabel::Outside).is_err());
        assert!(Token::new("a\tb", PosTag::N, NerLabel::Outside).is_err());
        assert!(Token::new("ab", PosTag::N, NerLabel::Outside).is_ok());
    }

    #[test]
    fn empty_sentence_rejected() {
        assert_eq!(Sentence::new(vec![]), Err(CorpusError::EmptySentence));
    }
}
