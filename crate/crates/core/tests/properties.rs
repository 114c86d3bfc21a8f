use proptest::prelude::*;

use seqlab::corpus::{
    encode_spans, extract_entities, parse_conll, validate_bioes, write_conll, Corpus, EntityType, NerLabel, PosTag,
    Sentence, Span, TagStats, Token,
};
use seqlab::metrics::{label_counts, macro_f1, per_label_prf, token_accuracy, weighted_f1, Counts};

fn surface() -> impl Strategy<Value = String> {
    "[a-zက-အ၀-၉ါ-ှ.,-]{1,6}"
}

fn token() -> impl Strategy<Value = Token> {
    (surface(), 0..PosTag::ALL.len(), 0..25usize).prop_map(|(s, p, n)| {
        Token::new(s, PosTag::ALL[p], NerLabel::all()[n]).unwrap()
    })
}

fn corpus() -> impl Strategy<Value = Corpus> {
    prop::collection::vec(prop::collection::vec(token(), 1..8), 0..6).prop_map(|ss| Corpus {
        name: String::new(),
        sentences: ss.into_iter().map(|t| Sentence::new(t).unwrap()).collect(),
    })
}

/// Non-overlapping spans over a sequence of length `len`.
fn spans(len: usize) -> impl Strategy<Value = Vec<Span>> {
    prop::collection::vec((any::<bool>(), 0..4usize, 0..6usize), len).prop_map(move |draws| {
        let mut out = Vec::new();
        let mut i = 0;
        for (open, width, ty) in draws {
            if i >= len {
                break;
            }
            if open {
                let end = (i + width).min(len - 1);
                out.push(Span {
                    entity: EntityType::ALL[ty],
                    start: i,
                    end,
                });
                i = end + 1;
            } else {
                i += 1;
            }
        }
        out
    })
}

fn label_pairs() -> impl Strategy<Value = (Vec<Vec<u8>>, Vec<Vec<u8>>)> {
    prop::collection::vec(prop::collection::vec((0..5u8, 0..5u8), 1..10), 1..6)
        .prop_map(|ss| ss.into_iter().map(|s| s.into_iter().unzip()).unzip())
}

proptest! {
    #[test]
    fn conll_round_trip(c in corpus()) {
        let back = parse_conll(&write_conll(&c), false).unwrap();
        prop_assert_eq!(back.sentences, c.sentences);
    }

    #[test]
    fn stats_sum_to_token_count(c in corpus()) {
        let stats = TagStats::from_corpus(&c);
        let total: u64 = NerLabel::all().into_iter().map(|l| stats.label_count(l)).sum();
        prop_assert_eq!(total, c.token_count() as u64);
    }

    #[test]
    fn span_encoding_round_trip((len, spans) in (1..20usize).prop_flat_map(|n| (Just(n), spans(n)))) {
        let labels = encode_spans(&spans, len);
        prop_assert!(validate_bioes(&labels).is_empty());
        prop_assert_eq!(extract_entities(&labels).unwrap(), spans);
    }

    #[test]
    fn at_most_one_violation_per_position(labels in prop::collection::vec(0..25usize, 1..12)) {
        let seq: Vec<NerLabel> = labels.into_iter().map(|i| NerLabel::all()[i]).collect();
        let v = validate_bioes(&seq);
        for w in v.windows(2) {
            prop_assert!(w[0].position < w[1].position);
        }
        prop_assert_eq!(v.is_empty(), extract_entities(&seq).is_ok());
    }

    #[test]
    fn metrics_ignore_sentence_order((gold, pred) in label_pairs(), rot in 0..6usize) {
        let n = gold.len();
        let k = rot % n;
        let mut g2 = gold.clone();
        let mut p2 = pred.clone();
        g2.rotate_left(k);
        p2.rotate_left(k);
        prop_assert_eq!(per_label_prf(&gold, &pred).unwrap(), per_label_prf(&g2, &p2).unwrap());
        prop_assert_eq!(token_accuracy(&gold, &pred).unwrap(), token_accuracy(&g2, &p2).unwrap());
    }

    #[test]
    fn counts_are_additive((gold, pred) in label_pairs(), split in 0..6usize) {
        let cut = split % gold.len();
        let whole = label_counts(&gold, &pred).unwrap();
        let mut merged = label_counts(&gold[..cut], &pred[..cut]).unwrap();
        for (l, c) in label_counts(&gold[cut..], &pred[cut..]).unwrap() {
            merged.entry(l).or_insert_with(Counts::default).merge(&c);
        }
        prop_assert_eq!(merged, whole);
    }

    #[test]
    fn scores_are_bounded((gold, pred) in label_pairs()) {
        let per = per_label_prf(&gold, &pred).unwrap();
        for s in [macro_f1(&per).unwrap(), weighted_f1(&per).unwrap(), token_accuracy(&gold, &pred).unwrap()] {
            prop_assert!((0.0..=1.0).contains(&s));
        }
        let perfect = per_label_prf(&gold, &gold).unwrap();
        prop_assert_eq!(macro_f1(&perfect).unwrap(), 1.0);
    }
}
