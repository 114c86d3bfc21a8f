use std::fmt::Write;

use super::{Corpus, EntityType, NerLabel, Position};

/// Tag counts laid out as entity rows by B/I/E/S columns, plus the `O` count.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TagStats {
    counts: [[u64; 4]; 6],
    pub outside: u64,
    pub tokens: u64,
    pub sentences: u64,
}

impl TagStats {
    pub fn from_corpus(corpus: &Corpus) -> Self {
        let mut stats = TagStats {
            sentences: corpus.len() as u64,
            ..Default::default()
        };
        for sentence in &corpus.sentences {
            for token in sentence.tokens() {
                stats.tokens += 1;
                match token.ner {
                    NerLabel::Outside => stats.outside += 1,
                    NerLabel::Entity(pos, ty) => stats.counts[ty.index()][pos.index()] += 1,
                }
            }
        }
        stats
    }

    pub fn count(&self, entity: EntityType, position: Position) -> u64 {
        self.counts[entity.index()][position.index()]
    }

    pub fn label_count(&self, label: NerLabel) -> u64 {
        match label {
            NerLabel::Outside => self.outside,
            NerLabel::Entity(pos, ty) => self.count(ty, pos),
        }
    }

    /// Aligned text table, entity rows by B/I/E/S columns, `-` for the
    /// undefined `O` cells.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<6}{:>10}{:>10}{:>10}{:>10}", "Tags", "B", "I", "E", "S");
        for ty in EntityType::ALL {
            let row = &self.counts[ty.index()];
            let _ = writeln!(
                out,
                "{:<6}{:>10}{:>10}{:>10}{:>10}",
                ty.as_str(),
                row[0],
                row[1],
                row[2],
                row[3]
            );
        }
        let _ = writeln!(out, "{:<6}{:>10}{:>10}{:>10}{:>10}", "O", self.outside, "-", "-", "-");
        let _ = writeln!(out, "tokens={} sentences={}", self.tokens, self.sentences);
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("entity,B,I,E,S\n");
        for ty in EntityType::ALL {
            let row = &self.counts[ty.index()];
            let _ = writeln!(out, "{},{},{},{},{}", ty.as_str(), row[0], row[1], row[2], row[3]);
        }
        let _ = writeln!(out, "O,{},-,-,-", self.outside);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_conll, SAMPLE_CONLL};

    #[test]
    fn sample_counts() {
        let stats = TagStats::from_corpus(&parse_conll(SAMPLE_CONLL, true).unwrap());
        assert_eq!(stats.count(EntityType::Loc, Position::Single), 1);
        assert_eq!(stats.count(EntityType::Org, Position::Begin), 2);
        assert_eq!(stats.count(EntityType::Org, Position::End), 2);
        assert_eq!(stats.outside, 5);
        let total: u64 = NerLabel::all().into_iter().map(|l| stats.label_count(l)).sum();
        assert_eq!(total, 10);
        assert_eq!(stats.tokens, 10);
        assert_eq!(stats.sentences, 1);
    }

    #[test]
    fn empty_corpus_is_zero() {
        let stats = TagStats::from_corpus(&Corpus::default());
        assert_eq!(stats, TagStats::default());
        assert!(stats.to_csv().starts_with("entity,B,I,E,S\nLOC,0,0,0,0\n"));
    }
}
