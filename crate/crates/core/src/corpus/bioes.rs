use std::fmt;

use super::{CorpusError, EntityType, NerLabel, Position};

/// The BIOES well-formedness rules.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Rule {
    /// `I-X` or `E-X` as the first label of a sentence.
    ContinuationAtStart,
    /// `I-X` or `E-X` not directly preceded by `B-X` or `I-X`.
    InvalidPredecessor,
    /// `B-X` or `I-X` not directly followed by `I-X` or `E-X`.
    UnclosedEntity,
    /// `B-X` or `I-X` as the last label of a sentence.
    UnclosedAtEnd,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::ContinuationAtStart => "continuation_at_start",
            Rule::InvalidPredecessor => "invalid_predecessor",
            Rule::UnclosedEntity => "unclosed_entity",
            Rule::UnclosedAtEnd => "unclosed_at_end",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Violation {
    pub position: usize,
    pub rule: Rule,
}

/// An entity span with inclusive bounds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Span {
    pub entity: EntityType,
    pub start: usize,
    pub end: usize,
}

fn continues(label: NerLabel, ty: EntityType) -> bool {
    matches!(label, NerLabel::Entity(Position::Inside | Position::End, t) if t == ty)
}

fn opens(label: NerLabel, ty: EntityType) -> bool {
    matches!(label, NerLabel::Entity(Position::Begin | Position::Inside, t) if t == ty)
}

/// Reports every position whose label breaks a BIOES rule.
///
/// Each position is reported at most once: predecessor rules are checked
/// before successor rules and the first broken one is recorded. An empty
/// result means the sequence is well-formed.
pub fn validate_bioes(labels: &[NerLabel]) -> Vec<Violation> {
    let mut out = Vec::new();
    let last = labels.len().saturating_sub(1);
    for (j, &label) in labels.iter().enumerate() {
        let NerLabel::Entity(pos, ty) = label else {
            continue;
        };
        let rule = match pos {
            Position::Inside | Position::End if j == 0 => Some(Rule::ContinuationAtStart),
            Position::Inside | Position::End if !opens(labels[j - 1], ty) => {
                Some(Rule::InvalidPredecessor)
            }
            _ => None,
        };
        let rule = rule.or(match pos {
            Position::Begin | Position::Inside if j == last => Some(Rule::UnclosedAtEnd),
            Position::Begin | Position::Inside if !continues(labels[j + 1], ty) => {
                Some(Rule::UnclosedEntity)
            }
            _ => None,
        });
        if let Some(rule) = rule {
            out.push(Violation { position: j, rule });
        }
    }
    out
}

/// Decodes a well-formed label sequence into its entity spans, sorted by
/// start position.
pub fn extract_entities(labels: &[NerLabel]) -> Result<Vec<Span>, CorpusError> {
    if let Some(v) = validate_bioes(labels).first() {
        return Err(CorpusError::InvalidSequence {
            position: v.position,
        });
    }
    let mut spans = Vec::new();
    let mut open: Option<usize> = None;
    for (i, label) in labels.iter().enumerate() {
        match *label {
            NerLabel::Outside => {}
            NerLabel::Entity(Position::Single, entity) => spans.push(Span {
                entity,
                start: i,
                end: i,
            }),
            NerLabel::Entity(Position::Begin, _) => open = Some(i),
            NerLabel::Entity(Position::Inside, _) => {}
            NerLabel::Entity(Position::End, entity) => {
                let start = open.take().expect("validated sequence closes only open spans");
                spans.push(Span {
                    entity,
                    start,
                    end: i,
                });
            }
        }
    }
    Ok(spans)
}

/// Encodes disjoint spans back into a BIOES label sequence of length `len`.
pub fn encode_spans(spans: &[Span], len: usize) -> Vec<NerLabel> {
    let mut labels = vec![NerLabel::Outside; len];
    for span in spans {
        if span.start == span.end {
            labels[span.start] = NerLabel::Entity(Position::Single, span.entity);
            continue;
        }
        labels[span.start] = NerLabel::Entity(Position::Begin, span.entity);
        for label in &mut labels[span.start + 1..span.end] {
            *label = NerLabel::Entity(Position::Inside, span.entity);
        }
        labels[span.end] = NerLabel::Entity(Position::End, span.entity);
    }
    labels
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(s: &str) -> Vec<NerLabel> {
        s.split_whitespace().map(|l| l.parse().unwrap()).collect()
    }

    #[test]
    fn well_formed_sequences() {
        assert!(validate_bioes(&labels("S-LOC O B-ORG E-ORG O")).is_empty());
        assert!(validate_bioes(&labels("O O O")).is_empty());
        assert!(validate_bioes(&labels("B-PER I-PER I-PER E-PER S-PER")).is_empty());
        assert!(validate_bioes(&labels("S-LOC S-ORG")).is_empty());
    }

    #[test]
    fn inside_at_start_then_unclosed_begin() {
        let v = validate_bioes(&labels("I-PER B-LOC"));
        assert_eq!(
            v,
            vec![
                Violation {
                    position: 0,
                    rule: Rule::ContinuationAtStart
                },
                Violation {
                    position: 1,
                    rule: Rule::UnclosedAtEnd
                },
            ]
        );
    }

    #[test]
    fn type_mismatch_is_caught_on_both_sides() {
        let v = validate_bioes(&labels("B-LOC E-PER"));
        assert_eq!(v.len(), 2);
        assert_eq!(v[0].rule, Rule::UnclosedEntity);
        assert_eq!(v[1].rule, Rule::InvalidPredecessor);
    }

    #[test]
    fn extract_sample_spans() {
        let spans =
            extract_entities(&labels("S-LOC O B-ORG E-ORG O B-ORG E-ORG O O O")).unwrap();
        let got: Vec<_> = spans.iter().map(|s| (s.entity, s.start, s.end)).collect();
        assert_eq!(
            got,
            vec![
                (EntityType::Loc, 0, 0),
                (EntityType::Org, 2, 3),
                (EntityType::Org, 5, 6)
            ]
        );
    }

    #[test]
    fn extract_rejects_invalid() {
        assert_eq!(
            extract_entities(&labels("O B-LOC")),
            Err(CorpusError::InvalidSequence { position: 1 })
        );
        assert_eq!(extract_entities(&labels("O O")).unwrap(), vec![]);
    }

    #[test]
    fn encode_long_span() {
        let spans = [Span {
            entity: EntityType::Date,
            start: 1,
            end: 4,
        }];
        assert_eq!(
            encode_spans(&spans, 6),
            labels("O B-DATE I-DATE I-DATE E-DATE O")
        );
    }
}
