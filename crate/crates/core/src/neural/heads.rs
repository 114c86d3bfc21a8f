use rand::Rng;

use crate::crf::{marginals, path_score};
use crate::matrix::{log_sum_exp, Matrix};

use super::NeuralError;

fn check_gold(scores: &Matrix, gold: &[usize]) -> Result<(), NeuralError> {
    if gold.len() != scores.rows() {
        return Err(NeuralError::Shape(format!(
            "{} gold labels for {} positions",
            gold.len(),
            scores.rows()
        )));
    }
    if scores.rows() == 0 {
        return Err(NeuralError::EmptySentence);
    }
    if let Some(&bad) = gold.iter().find(|&&y| y >= scores.cols()) {
        return Err(NeuralError::LabelOutOfRange {
            label: bad,
            labels: scores.cols(),
        });
    }
    Ok(())
}

/// Mean per-token cross-entropy and the per-token probabilities.
pub fn softmax_head_loss(scores: &Matrix, gold: &[usize]) -> Result<(f64, Matrix), NeuralError> {
    check_gold(scores, gold)?;
    let (t_len, k) = scores.shape();
    let mut probs = Matrix::zeros(t_len, k);
    let mut loss = 0.0;
    for t in 0..t_len {
        let row = scores.row(t);
        let lse = log_sum_exp(row);
        loss += lse - row[gold[t]];
        for (p, s) in probs.row_mut(t).iter_mut().zip(row) {
            *p = (s - lse).exp();
        }
    }
    Ok((loss / t_len as f64, probs))
}

/// Softmax loss with the gradient w.r.t. the scores.
pub(crate) fn softmax_loss_grad(scores: &Matrix, gold: &[usize]) -> Result<(f64, Matrix), NeuralError> {
    let (loss, mut probs) = softmax_head_loss(scores, gold)?;
    let scale = 1.0 / scores.rows() as f64;
    for (t, &y) in gold.iter().enumerate() {
        probs.add_at(t, y, -1.0);
        probs.row_mut(t).iter_mut().for_each(|v| *v *= scale);
    }
    Ok((loss, probs))
}

/// Sentence-level CRF loss: log-partition minus the gold path score.
pub fn crf_head_loss(scores: &Matrix, transitions: &Matrix, gold: &[usize]) -> Result<f64, NeuralError> {
    check_gold(scores, gold)?;
    let z = crate::crf::log_partition(scores, transitions)?;
    Ok(z - path_score(scores, transitions, gold))
}

/// CRF loss with gradients w.r.t. the scores and the transitions.
pub(crate) fn crf_loss_grad(
    scores: &Matrix,
    transitions: &Matrix,
    gold: &[usize],
) -> Result<(f64, Matrix, Matrix), NeuralError> {
    check_gold(scores, gold)?;
    let m = marginals(scores, transitions)?;
    let loss = m.log_z - path_score(scores, transitions, gold);
    let mut d_scores = m.node;
    for (t, &y) in gold.iter().enumerate() {
        d_scores.add_at(t, y, -1.0);
    }
    let k = scores.cols();
    let mut d_trans = Matrix::zeros(k, k);
    for (t, edge) in m.edge.iter().enumerate() {
        for (d, e) in d_trans.as_mut_slice().iter_mut().zip(edge.as_slice()) {
            *d += e;
        }
        d_trans.add_at(gold[t], gold[t + 1], -1.0);
    }
    Ok((loss, d_scores, d_trans))
}

pub fn joint_loss(ner_loss: f64, pos_loss: f64, weight: f64) -> f64 {
    ner_loss + weight * pos_loss
}

/// Inverted dropout mask: each entry is 0 with probability `rate`,
/// otherwise `1 / (1 - rate)`.
pub(crate) fn dropout_mask<R: Rng + ?Sized>(rows: usize, cols: usize, rate: f64, rng: &mut R) -> Matrix {
    let keep = 1.0 / (1.0 - rate);
    Matrix::from_fn(rows, cols, |_, _| if rng.gen::<f64>() < rate { 0.0 } else { keep })
}

pub fn apply_dropout<R: Rng>(x: &Matrix, rate: f64, training: bool, rng: &mut R) -> Matrix {
    assert!((0.0..1.0).contains(&rate), "dropout rate must be in [0, 1)");
    if !training || rate == 0.0 {
        return x.clone();
    }
    let mask = dropout_mask(x.rows(), x.cols(), rate, rng);
    Matrix::from_fn(x.rows(), x.cols(), |r, c| x.get(r, c) * mask.get(r, c))
}
