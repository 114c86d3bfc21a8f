use std::collections::BTreeMap;

use rand::Rng;

use crate::crf::viterbi;
use crate::embeddings::{EmbRow, EmbeddingTable};
use crate::matrix::{argmax, Matrix};

use super::heads::{crf_loss_grad, dropout_mask, softmax_loss_grad};
use super::lstm::{self, LstmParams};
use super::NeuralError;

/// Output layer of a head.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Inference {
    Softmax,
    Crf,
}

impl Inference {
    pub fn as_str(self) -> &'static str {
        match self {
            Inference::Softmax => "softmax",
            Inference::Crf => "crf",
        }
    }
}

/// A task head: linear projection of the BiLSTM state to `K` label scores,
/// plus a `K x K` transition matrix for CRF heads.
#[derive(Clone, Debug, PartialEq)]
pub struct Head {
    /// `K x 2H`.
    pub proj: Matrix,
    pub bias: Vec<f64>,
    pub transitions: Option<Matrix>,
}

impl Head {
    pub fn zeros(labels: usize, input: usize, inference: Inference) -> Self {
        Head {
            proj: Matrix::zeros(labels, input),
            bias: vec![0.0; labels],
            transitions: (inference == Inference::Crf).then(|| Matrix::zeros(labels, labels)),
        }
    }

    pub fn labels(&self) -> usize {
        self.bias.len()
    }

    fn scores(&self, hidden: &[Vec<f64>]) -> Matrix {
        let k = self.labels();
        let mut s = Matrix::zeros(hidden.len(), k);
        for (t, h) in hidden.iter().enumerate() {
            for y in 0..k {
                let mut acc = self.bias[y];
                for (w, x) in self.proj.row(y).iter().zip(h) {
                    acc += w * x;
                }
                s.set(t, y, acc);
            }
        }
        s
    }

    fn decode(&self, scores: &Matrix) -> Vec<usize> {
        match &self.transitions {
            Some(tr) => viterbi(scores, tr).map(|(p, _)| p).unwrap_or_default(),
            None => (0..scores.rows()).map(|t| argmax(scores.row(t))).collect(),
        }
    }
}

/// Embedding layer, bidirectional LSTM encoder, and one head per task.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    pub embedding: EmbeddingTable,
    pub fwd: LstmParams,
    pub bwd: LstmParams,
    pub heads: Vec<Head>,
    pub dropout: f64,
}

/// Gradients mirroring a [`Network`]. Embedding gradients are kept per
/// touched storage row.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub fwd: LstmParams,
    pub bwd: LstmParams,
    pub heads: Vec<Head>,
    pub embedding: BTreeMap<EmbRow, Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        let d = net.fwd.input_size();
        let h = net.fwd.hidden_size();
        Gradients {
            fwd: LstmParams::zeros(d, h),
            bwd: LstmParams::zeros(d, h),
            heads: net
                .heads
                .iter()
                .map(|hd| Head {
                    proj: Matrix::zeros(hd.proj.rows(), hd.proj.cols()),
                    bias: vec![0.0; hd.labels()],
                    transitions: hd.transitions.as_ref().map(|t| Matrix::zeros(t.rows(), t.cols())),
                })
                .collect(),
            embedding: BTreeMap::new(),
        }
    }

    /// Dense tensors in the same order as [`Network::dense_params_mut`].
    pub fn dense(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        out.extend(self.fwd.params());
        out.extend(self.bwd.params());
        for h in &self.heads {
            out.push(h.proj.as_slice());
            out.push(&h.bias);
            if let Some(t) = &h.transitions {
                out.push(t.as_slice());
            }
        }
        out
    }

    fn dense_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        out.extend(self.fwd.params_mut());
        out.extend(self.bwd.params_mut());
        for h in &mut self.heads {
            out.push(h.proj.as_mut_slice());
            out.push(&mut h.bias);
            if let Some(t) = &mut h.transitions {
                out.push(t.as_mut_slice());
            }
        }
        out
    }

    pub fn add(&mut self, other: &Gradients) {
        for (d, s) in self.dense_mut().into_iter().zip(other.dense()) {
            for (a, b) in d.iter_mut().zip(s) {
                *a += b;
            }
        }
        for (row, g) in &other.embedding {
            let dst = self.embedding.entry(*row).or_insert_with(|| vec![0.0; g.len()]);
            for (a, b) in dst.iter_mut().zip(g) {
                *a += b;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for d in self.dense_mut() {
            d.iter_mut().for_each(|v| *v *= factor);
        }
        for g in self.embedding.values_mut() {
            g.iter_mut().for_each(|v| *v *= factor);
        }
    }
}

/// Per-head gold sequence and loss weight.
pub struct Target<'a> {
    pub gold: &'a [usize],
    pub weight: f64,
}

impl Network {
    pub fn new<R: Rng>(
        embedding: EmbeddingTable,
        hidden: usize,
        head_labels: &[usize],
        inference: Inference,
        dropout: f64,
        rng: &mut R,
    ) -> Result<Self, NeuralError> {
        if hidden == 0 || head_labels.is_empty() || head_labels.contains(&0) {
            return Err(NeuralError::Config("hidden size and label counts must be positive".into()));
        }
        if !(0.0..1.0).contains(&dropout) {
            return Err(NeuralError::Config(format!("dropout {dropout} outside [0, 1)")));
        }
        let d = embedding.dim();
        let fwd = LstmParams::init(d, hidden, rng);
        let bwd = LstmParams::init(d, hidden, rng);
        let heads = head_labels
            .iter()
            .map(|&k| Head::zeros(k, 2 * hidden, inference))
            .collect();
        Ok(Network {
            embedding,
            fwd,
            bwd,
            heads,
            dropout,
        })
    }

    /// Verifies that all tensors agree with the embedding dimension and the
    /// hidden size.
    pub fn check_shapes(&self) -> Result<(), NeuralError> {
        let d = self.embedding.dim();
        let h = self.fwd.hidden_size();
        for p in [&self.fwd, &self.bwd] {
            if p.w.shape() != (4 * h, d) || p.u.shape() != (4 * h, h) || p.b.len() != 4 * h {
                return Err(NeuralError::Shape("LSTM tensors disagree with sizes".into()));
            }
        }
        if self.heads.is_empty() {
            return Err(NeuralError::Shape("network has no heads".into()));
        }
        for head in &self.heads {
            let k = head.labels();
            let trans_ok = head.transitions.as_ref().is_none_or(|t| t.shape() == (k, k));
            if k == 0 || head.proj.shape() != (k, 2 * h) || !trans_ok {
                return Err(NeuralError::Shape("head tensors disagree with sizes".into()));
            }
        }
        Ok(())
    }

    pub fn hidden_size(&self) -> usize {
        self.fwd.hidden_size()
    }

    /// Dense trainable tensors: forward LSTM (w, u, b), backward LSTM
    /// (w, u, b), then per head projection, bias, and transitions.
    pub fn dense_params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        out.extend(self.fwd.params_mut());
        out.extend(self.bwd.params_mut());
        for h in &mut self.heads {
            out.push(h.proj.as_mut_slice());
            out.push(&mut h.bias);
            if let Some(t) = &mut h.transitions {
                out.push(t.as_mut_slice());
            }
        }
        out
    }

    /// BiLSTM states for a sentence with optional dropout masks applied.
    fn encode(
        &self,
        words: &[&str],
        rng: Option<&mut dyn rand::RngCore>,
    ) -> Forward {
        let t_len = words.len();
        let d = self.embedding.dim();
        let hid = self.hidden_size();
        let rows: Vec<Vec<EmbRow>> = words.iter().map(|w| self.embedding.components(w)).collect();
        let mut xs: Vec<Vec<f64>> = rows.iter().map(|r| self.embedding.embed_rows(r)).collect();
        let (x_mask, h_mask) = match rng {
            Some(rng) if self.dropout > 0.0 => (
                Some(dropout_mask(t_len, d, self.dropout, rng)),
                Some(dropout_mask(t_len, 2 * hid, self.dropout, rng)),
            ),
            _ => (None, None),
        };
        if let Some(mask) = &x_mask {
            for (t, x) in xs.iter_mut().enumerate() {
                x.iter_mut().zip(mask.row(t)).for_each(|(v, m)| *v *= m);
            }
        }
        let refs: Vec<&[f64]> = xs.iter().map(|x| x.as_slice()).collect();
        let (hf, fwd_cache) = lstm::run(&self.fwd, &refs);
        let rev: Vec<&[f64]> = refs.iter().rev().copied().collect();
        let (mut hb, bwd_cache) = lstm::run(&self.bwd, &rev);
        hb.reverse();
        let mut hidden: Vec<Vec<f64>> = hf
            .into_iter()
            .zip(hb)
            .map(|(mut f, b)| {
                f.extend(b);
                f
            })
            .collect();
        if let Some(mask) = &h_mask {
            for (t, h) in hidden.iter_mut().enumerate() {
                h.iter_mut().zip(mask.row(t)).for_each(|(v, m)| *v *= m);
            }
        }
        Forward {
            rows,
            x_mask,
            h_mask,
            fwd_cache,
            bwd_cache,
            hidden,
        }
    }

    /// Label scores of every head, evaluation mode.
    pub fn head_scores(&self, words: &[&str]) -> Vec<Matrix> {
        let fw = self.encode(words, None);
        self.heads.iter().map(|h| h.scores(&fw.hidden)).collect()
    }

    /// Per-head label indices: argmax for softmax heads (lowest index on
    /// ties), Viterbi for CRF heads.
    pub fn predict(&self, words: &[&str]) -> Vec<Vec<usize>> {
        if words.is_empty() {
            return vec![Vec::new(); self.heads.len()];
        }
        self.head_scores(words)
            .iter()
            .zip(&self.heads)
            .map(|(s, h)| h.decode(s))
            .collect()
    }

    /// Weighted sum of head losses, evaluation mode.
    pub fn loss(&self, words: &[&str], targets: &[Target<'_>]) -> Result<f64, NeuralError> {
        Ok(self.forward_backward(words, targets, None, false)?.0)
    }

    /// Weighted sum of head losses and, when `want_grad`, exact gradients
    /// of it. Passing an RNG turns on training-mode dropout; the masks drawn
    /// in the forward pass are reused by the backward pass.
    pub fn forward_backward(
        &self,
        words: &[&str],
        targets: &[Target<'_>],
        rng: Option<&mut dyn rand::RngCore>,
        want_grad: bool,
    ) -> Result<(f64, Option<Gradients>), NeuralError> {
        if words.is_empty() {
            return Err(NeuralError::EmptySentence);
        }
        if targets.len() != self.heads.len() {
            return Err(NeuralError::Shape(format!(
                "{} targets for {} heads",
                targets.len(),
                self.heads.len()
            )));
        }
        let fw = self.encode(words, rng);
        let t_len = words.len();
        let hid = self.hidden_size();
        let mut total = 0.0;
        let mut grads = want_grad.then(|| Gradients::zeros_like(self));
        let mut d_hidden = vec![vec![0.0; 2 * hid]; t_len];

        for (k, (head, target)) in self.heads.iter().zip(targets).enumerate() {
            let scores = head.scores(&fw.hidden);
            let (loss, d_scores, d_trans) = match &head.transitions {
                None => {
                    let (l, ds) = softmax_loss_grad(&scores, target.gold)?;
                    (l, ds, None)
                }
                Some(tr) => {
                    let (l, ds, dt) = crf_loss_grad(&scores, tr, target.gold)?;
                    (l, ds, Some(dt))
                }
            };
            total += target.weight * loss;
            let Some(g) = grads.as_mut() else { continue };
            let gh = &mut g.heads[k];
            let w = target.weight;
            for t in 0..t_len {
                let h = &fw.hidden[t];
                let dh = &mut d_hidden[t];
                for (y, &ds) in d_scores.row(t).iter().enumerate() {
                    let ds = w * ds;
                    if ds == 0.0 {
                        continue;
                    }
                    gh.bias[y] += ds;
                    for (gp, x) in gh.proj.row_mut(y).iter_mut().zip(h) {
                        *gp += ds * x;
                    }
                    for (d, p) in dh.iter_mut().zip(head.proj.row(y)) {
                        *d += ds * p;
                    }
                }
            }
            if let (Some(dt), Some(gt)) = (d_trans, gh.transitions.as_mut()) {
                for (a, b) in gt.as_mut_slice().iter_mut().zip(dt.as_slice()) {
                    *a += w * b;
                }
            }
        }

        let Some(mut g) = grads else {
            return Ok((total, None));
        };
        if let Some(mask) = &fw.h_mask {
            for (t, dh) in d_hidden.iter_mut().enumerate() {
                dh.iter_mut().zip(mask.row(t)).for_each(|(v, m)| *v *= m);
            }
        }
        let dh_f: Vec<Vec<f64>> = d_hidden.iter().map(|d| d[..hid].to_vec()).collect();
        let dh_b: Vec<Vec<f64>> = d_hidden.iter().rev().map(|d| d[hid..].to_vec()).collect();
        let mut dx = lstm::backprop(&self.fwd, &fw.fwd_cache, &dh_f, &mut g.fwd);
        let dx_b = lstm::backprop(&self.bwd, &fw.bwd_cache, &dh_b, &mut g.bwd);
        for (t, db) in dx_b.into_iter().rev().enumerate() {
            dx[t].iter_mut().zip(db).for_each(|(a, b)| *a += b);
        }
        if self.embedding.mode().is_trainable() {
            let d = self.embedding.dim();
            for (t, rows) in fw.rows.iter().enumerate() {
                if rows.is_empty() {
                    continue;
                }
                let scale = 1.0 / rows.len() as f64;
                for &row in rows {
                    let dst = g.embedding.entry(row).or_insert_with(|| vec![0.0; d]);
                    for (k, a) in dst.iter_mut().enumerate() {
                        let m = fw.x_mask.as_ref().map_or(1.0, |m| m.get(t, k));
                        *a += dx[t][k] * m * scale;
                    }
                }
            }
        }
        Ok((total, Some(g)))
    }
}

struct Forward {
    rows: Vec<Vec<EmbRow>>,
    x_mask: Option<Matrix>,
    h_mask: Option<Matrix>,
    fwd_cache: Vec<lstm::StepCache>,
    bwd_cache: Vec<lstm::StepCache>,
    hidden: Vec<Vec<f64>>,
}
