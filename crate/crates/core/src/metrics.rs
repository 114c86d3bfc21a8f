//! Token-level evaluation.
//!
//! Every metric here compares label sequences position by position. Any
//! 0/0 ratio counts as 0, and macro F1 averages only over labels that occur
//! in the gold data.

use std::collections::BTreeMap;
use std::fmt::{Display, Write as _};

use thiserror::Error;

use crate::corpus::{EntityType, NerLabel, Position};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("{gold} gold sentences but {pred} predicted sentences")]
    SentenceCount { gold: usize, pred: usize },
    #[error("sentence {sentence}: {gold} gold labels but {pred} predicted labels")]
    LengthMismatch {
        sentence: usize,
        gold: usize,
        pred: usize,
    },
    #[error("no gold tokens to evaluate")]
    NoSupport,
}

/// Confusion counts for one label.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl Counts {
    pub fn support(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn merge(&mut self, other: &Counts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }

    pub fn prf(&self) -> Prf {
        let precision = ratio(self.tp, self.tp + self.fp);
        let recall = ratio(self.tp, self.tp + self.fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Prf {
            precision,
            recall,
            f1,
            support: self.support(),
        }
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

fn check<L>(gold: &[Vec<L>], pred: &[Vec<L>]) -> Result<(), MetricsError> {
    if gold.len() != pred.len() {
        return Err(MetricsError::SentenceCount {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    for (i, (g, p)) in gold.iter().zip(pred).enumerate() {
        if g.len() != p.len() {
            return Err(MetricsError::LengthMismatch {
                sentence: i,
                gold: g.len(),
                pred: p.len(),
            });
        }
    }
    Ok(())
}

pub fn token_accuracy<L: PartialEq>(gold: &[Vec<L>], pred: &[Vec<L>]) -> Result<f64, MetricsError> {
    check(gold, pred)?;
    let mut total = 0usize;
    let mut correct = 0usize;
    for (g, p) in gold.iter().zip(pred) {
        total += g.len();
        correct += g.iter().zip(p).filter(|(a, b)| a == b).count();
    }
    if total == 0 {
        return Err(MetricsError::NoSupport);
    }
    Ok(correct as f64 / total as f64)
}

/// Per-label confusion counts for every label seen in gold or prediction.
pub fn label_counts<L: Ord + Clone>(
    gold: &[Vec<L>],
    pred: &[Vec<L>],
) -> Result<BTreeMap<L, Counts>, MetricsError> {
    check(gold, pred)?;
    let mut counts: BTreeMap<L, Counts> = BTreeMap::new();
    for (g, p) in gold.iter().zip(pred) {
        for (a, b) in g.iter().zip(p) {
            if a == b {
                counts.entry(a.clone()).or_default().tp += 1;
            } else {
                counts.entry(a.clone()).or_default().fn_ += 1;
                counts.entry(b.clone()).or_default().fp += 1;
            }
        }
    }
    Ok(counts)
}

pub fn per_label_prf<L: Ord + Clone>(
    gold: &[Vec<L>],
    pred: &[Vec<L>],
) -> Result<BTreeMap<L, Prf>, MetricsError> {
    Ok(label_counts(gold, pred)?
        .into_iter()
        .map(|(l, c)| (l, c.prf()))
        .collect())
}

/// Unweighted mean F1 over labels with gold support.
pub fn macro_f1<L>(per_label: &BTreeMap<L, Prf>) -> Result<f64, MetricsError> {
    let supported: Vec<f64> = per_label
        .values()
        .filter(|p| p.support > 0)
        .map(|p| p.f1)
        .collect();
    if supported.is_empty() {
        return Err(MetricsError::NoSupport);
    }
    Ok(supported.iter().sum::<f64>() / supported.len() as f64)
}

/// Support-weighted mean F1.
pub fn weighted_f1<L>(per_label: &BTreeMap<L, Prf>) -> Result<f64, MetricsError> {
    let total: u64 = per_label.values().map(|p| p.support).sum();
    if total == 0 {
        return Err(MetricsError::NoSupport);
    }
    let sum: f64 = per_label.values().map(|p| p.support as f64 * p.f1).sum();
    Ok(sum / total as f64)
}

/// F1 per entity type and position, plus the `O` cell. Cells without gold
/// support are `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tagwise {
    pub cells: [[Option<f64>; 4]; 6],
    pub outside: Option<f64>,
}

impl Tagwise {
    pub fn from_prf(per_label: &BTreeMap<NerLabel, Prf>) -> Self {
        let cell = |l: NerLabel| per_label.get(&l).filter(|p| p.support > 0).map(|p| p.f1);
        let mut cells = [[None; 4]; 6];
        for ty in EntityType::ALL {
            for pos in Position::ALL {
                cells[ty.index()][pos.index()] = cell(NerLabel::Entity(pos, ty));
            }
        }
        Tagwise {
            cells,
            outside: cell(NerLabel::Outside),
        }
    }

    pub fn get(&self, ty: EntityType, pos: Position) -> Option<f64> {
        self.cells[ty.index()][pos.index()]
    }

    pub fn to_table(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |f| format!("{f:.4}"));
        let mut out = String::new();
        let _ = writeln!(out, "{:<6}{:>8}{:>8}{:>8}{:>8}", "Tags", "B", "I", "E", "S");
        for ty in EntityType::ALL {
            let r = &self.cells[ty.index()];
            let _ = writeln!(
                out,
                "{:<6}{:>8}{:>8}{:>8}{:>8}",
                ty.as_str(),
                fmt(r[0]),
                fmt(r[1]),
                fmt(r[2]),
                fmt(r[3])
            );
        }
        let _ = writeln!(out, "{:<6}{:>8}{:>8}{:>8}{:>8}", "O", fmt(self.outside), "-", "-", "-");
        out
    }
}

pub fn tagwise_report(gold: &[Vec<NerLabel>], pred: &[Vec<NerLabel>]) -> Result<Tagwise, MetricsError> {
    Ok(Tagwise::from_prf(&per_label_prf(gold, pred)?))
}

pub const MACRO_CONVENTION: &str = "macro F1 averages labels with gold support > 0; 0/0 counts as 0";

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub weighted_f1: f64,
    pub per_label: BTreeMap<NerLabel, Prf>,
    pub tagwise: Tagwise,
}

impl EvalReport {
    pub fn new(gold: &[Vec<NerLabel>], pred: &[Vec<NerLabel>]) -> Result<Self, MetricsError> {
        let accuracy = token_accuracy(gold, pred)?;
        let per_label = per_label_prf(gold, pred)?;
        Ok(EvalReport {
            accuracy,
            macro_f1: macro_f1(&per_label)?,
            weighted_f1: weighted_f1(&per_label)?,
            tagwise: Tagwise::from_prf(&per_label),
            per_label,
        })
    }

    fn rows(&self) -> impl Iterator<Item = (NerLabel, &Prf)> {
        NerLabel::all().into_iter().filter_map(|l| self.per_label.get(&l).map(|p| (l, p)))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# {MACRO_CONVENTION}");
        let _ = writeln!(out, "accuracy     {:.4}", self.accuracy);
        let _ = writeln!(out, "weighted_f1  {:.4}", self.weighted_f1);
        let _ = writeln!(out, "macro_f1     {:.4}", self.macro_f1);
        out.push('\n');
        out.push_str(&self.tagwise.to_table());
        out.push('\n');
        let _ = writeln!(
            out,
            "{:<8}{:>10}{:>10}{:>10}{:>10}",
            "label", "precision", "recall", "f1", "support"
        );
        for (l, p) in self.rows() {
            let _ = writeln!(
                out,
                "{:<8}{:>10.4}{:>10.4}{:>10.4}{:>10}",
                l.to_string(),
                p.precision,
                p.recall,
                p.f1,
                p.support
            );
        }
        out
    }

    pub fn to_csv(&self) -> String {
        csv_report(self.rows(), self.accuracy, self.macro_f1, self.weighted_f1)
    }
}

/// `label,precision,recall,f1,support` rows followed by the
/// `accuracy,macro_f1,weighted_f1` summary.
pub fn csv_report<'a, L: Display + 'a>(
    rows: impl IntoIterator<Item = (L, &'a Prf)>,
    accuracy: f64,
    macro_f1: f64,
    weighted_f1: f64,
) -> String {
    let mut out = String::from("label,precision,recall,f1,support\n");
    for (l, p) in rows {
        let _ = writeln!(out, "{l},{},{},{},{}", p.precision, p.recall, p.f1, p.support);
    }
    out.push_str("accuracy,macro_f1,weighted_f1\n");
    let _ = writeln!(out, "{accuracy},{macro_f1},{weighted_f1}");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_conll, SAMPLE_CONLL};

    fn v(s: &str) -> Vec<Vec<char>> {
        vec![s.chars().collect()]
    }

    #[test]
    fn hand_example() {
        let per = per_label_prf(&v("AAB"), &v("ABB")).unwrap();
        let a = per[&'A'];
        let b = per[&'B'];
        assert_eq!((a.precision, a.recall, a.support), (1.0, 0.5, 2));
        assert_eq!((b.precision, b.recall, b.support), (0.5, 1.0, 1));
        assert!((a.f1 - 2.0 / 3.0).abs() < 1e-15 && (b.f1 - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(macro_f1(&per).unwrap(), 2.0 / 3.0);
    }

    #[test]
    fn predicted_but_never_gold() {
        let per = per_label_prf(&v("AA"), &v("AC")).unwrap();
        let c = per[&'C'];
        assert_eq!((c.precision, c.recall, c.f1, c.support), (0.0, 0.0, 0.0, 0));
        // C has no support, so only A counts
        assert_eq!(macro_f1(&per).unwrap(), per[&'A'].f1);
    }

    #[test]
    fn averaging_arithmetic() {
        let p = |f1, support| Prf { precision: 0.0, recall: 0.0, f1, support };
        let two: BTreeMap<u8, Prf> = [(0, p(1.0, 9)), (1, p(0.0, 1))].into();
        assert_eq!(macro_f1(&two).unwrap(), 0.5);
        assert!((weighted_f1(&two).unwrap() - 0.9).abs() < 1e-15);
        let even: BTreeMap<u8, Prf> = [(0, p(0.3, 4)), (1, p(0.8, 4))].into();
        assert!((weighted_f1(&even).unwrap() - macro_f1(&even).unwrap()).abs() < 1e-15);
        assert_eq!(macro_f1::<u8>(&BTreeMap::new()), Err(MetricsError::NoSupport));
    }

    #[test]
    fn all_outside_on_sample() {
        let c = parse_conll(SAMPLE_CONLL, true).unwrap();
        let gold: Vec<Vec<NerLabel>> = c.sentences.iter().map(|s| s.ner_labels()).collect();
        let pred: Vec<Vec<NerLabel>> = gold.iter().map(|s| vec![NerLabel::Outside; s.len()]).collect();
        // five of the ten tokens are entity tokens
        assert_eq!(token_accuracy(&gold, &pred).unwrap(), 0.5);
        assert_eq!(token_accuracy(&gold, &gold).unwrap(), 1.0);
    }

    #[test]
    fn mismatch_names_sentence() {
        let gold = vec![vec![1, 2], vec![3]];
        let pred = vec![vec![1, 2], vec![3, 4]];
        assert_eq!(
            token_accuracy(&gold, &pred),
            Err(MetricsError::LengthMismatch { sentence: 1, gold: 1, pred: 2 })
        );
        assert!(token_accuracy(&gold, &gold[..1]).is_err());
    }

    #[test]
    fn tagwise_marks_unsupported_cells() {
        let l = |s: &str| s.parse::<NerLabel>().unwrap();
        let gold = vec![vec![l("B-TIME"), l("E-TIME"), l("O")]];
        let pred = vec![vec![l("B-TIME"), l("I-TIME"), l("O")]];
        let t = tagwise_report(&gold, &pred).unwrap();
        assert_eq!(t.get(EntityType::Time, Position::Begin), Some(1.0));
        assert_eq!(t.get(EntityType::Time, Position::End), Some(0.0));
        assert_eq!(t.get(EntityType::Time, Position::Inside), None);
        assert_eq!(t.get(EntityType::Time, Position::Single), None);
        assert_eq!(t.outside, Some(1.0));
        let table = t.to_table();
        assert!(table.lines().any(|r| r.starts_with("TIME") && r.split_whitespace().collect::<Vec<_>>() == ["TIME", "1.0000", "-", "0.0000", "-"]));
    }

    #[test]
    fn report_layout() {
        let c = parse_conll(SAMPLE_CONLL, true).unwrap();
        let gold: Vec<Vec<NerLabel>> = c.sentences.iter().map(|s| s.ner_labels()).collect();
        let r = EvalReport::new(&gold, &gold).unwrap();
        let text = r.to_text();
        assert!(text.starts_with("# macro F1 averages labels with gold support > 0"));
        let order: Vec<&str> = text.lines().skip(1).take(3).map(|l| l.split_whitespace().next().unwrap()).collect();
        assert_eq!(order, ["accuracy", "weighted_f1", "macro_f1"]);
        let csv = r.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "label,precision,recall,f1,support");
        assert_eq!(lines[1], "O,1,1,1,5");
        assert_eq!(lines[lines.len() - 2], "accuracy,macro_f1,weighted_f1");
        assert_eq!(lines[lines.len() - 1], "1,1,1");
    }
}
