use rand::Rng;

use crate::matrix::Matrix;

use super::NeuralError;

/// Weights of one LSTM direction. Gate blocks are stacked row-wise in the
/// order input, forget, output, candidate: rows `0..H` belong to the input
/// gate, `H..2H` to the forget gate, and so on.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams {
    /// `4H x D` input-to-hidden weights.
    pub w: Matrix,
    /// `4H x H` hidden-to-hidden weights.
    pub u: Matrix,
    /// `4H` biases.
    pub b: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl LstmParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmParams {
            w: Matrix::zeros(4 * hidden, input),
            u: Matrix::zeros(4 * hidden, hidden),
            b: vec![0.0; 4 * hidden],
        }
    }

    /// Weights uniform in `[-1/sqrt(H), 1/sqrt(H)]`, forget bias 1, other
    /// biases 0.
    pub fn init<R: Rng>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        let mut p = Self::zeros(input, hidden);
        for x in p.w.as_mut_slice().iter_mut().chain(p.u.as_mut_slice()) {
            *x = rng.gen_range(-bound..=bound);
        }
        for b in &mut p.b[hidden..2 * hidden] {
            *b = 1.0;
        }
        p
    }

    pub fn input_size(&self) -> usize {
        self.w.cols()
    }

    pub fn hidden_size(&self) -> usize {
        self.u.cols()
    }

    pub(crate) fn params_mut(&mut self) -> [&mut [f64]; 3] {
        [self.w.as_mut_slice(), self.u.as_mut_slice(), &mut self.b]
    }

    pub(crate) fn params(&self) -> [&[f64]; 3] {
        [self.w.as_slice(), self.u.as_slice(), &self.b]
    }
}

/// Values saved by the forward pass of one step for backpropagation.
#[derive(Clone, Debug)]
pub(crate) struct StepCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    /// Activated gates, `4H` in i, f, o, g order.
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
}

fn step(x: &[f64], h_prev: &[f64], c_prev: &[f64], p: &LstmParams) -> (Vec<f64>, Vec<f64>, StepCache) {
    let hid = p.hidden_size();
    let mut gates = p.b.clone();
    for (r, z) in gates.iter_mut().enumerate() {
        let wr = p.w.row(r);
        let ur = p.u.row(r);
        let mut acc = 0.0;
        for (a, b) in wr.iter().zip(x) {
            acc += a * b;
        }
        for (a, b) in ur.iter().zip(h_prev) {
            acc += a * b;
        }
        *z += acc;
    }
    for (r, z) in gates.iter_mut().enumerate() {
        *z = if r < 3 * hid { sigmoid(*z) } else { z.tanh() };
    }
    let mut c = vec![0.0; hid];
    let mut h = vec![0.0; hid];
    let mut tanh_c = vec![0.0; hid];
    for k in 0..hid {
        let (i, f, o, g) = (gates[k], gates[hid + k], gates[2 * hid + k], gates[3 * hid + k]);
        c[k] = f * c_prev[k] + i * g;
        tanh_c[k] = c[k].tanh();
        h[k] = o * tanh_c[k];
    }
    let cache = StepCache {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        c_prev: c_prev.to_vec(),
        gates,
        tanh_c,
    };
    (h, c, cache)
}

/// One LSTM step: returns the new hidden and cell states.
pub fn lstm_cell(
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    p: &LstmParams,
) -> Result<(Vec<f64>, Vec<f64>), NeuralError> {
    let hid = p.hidden_size();
    if x.len() != p.input_size() || h_prev.len() != hid || c_prev.len() != hid || p.b.len() != 4 * hid {
        return Err(NeuralError::Shape(format!(
            "lstm cell expects x[{}], h[{hid}], c[{hid}]; got x[{}], h[{}], c[{}]",
            p.input_size(),
            x.len(),
            h_prev.len(),
            c_prev.len()
        )));
    }
    let (h, c, _) = step(x, h_prev, c_prev, p);
    Ok((h, c))
}

/// Runs the cell over `xs` from a zero state.
pub(crate) fn run(p: &LstmParams, xs: &[&[f64]]) -> (Vec<Vec<f64>>, Vec<StepCache>) {
    let hid = p.hidden_size();
    let mut h = vec![0.0; hid];
    let mut c = vec![0.0; hid];
    let mut hs = Vec::with_capacity(xs.len());
    let mut caches = Vec::with_capacity(xs.len());
    for x in xs {
        let (h2, c2, cache) = step(x, &h, &c, p);
        hs.push(h2.clone());
        caches.push(cache);
        h = h2;
        c = c2;
    }
    (hs, caches)
}

/// Backpropagation through time. `dh[t]` is the loss gradient flowing into
/// output `t`; parameter gradients are added to `grad` and input gradients
/// are returned.
pub(crate) fn backprop(
    p: &LstmParams,
    caches: &[StepCache],
    dh: &[Vec<f64>],
    grad: &mut LstmParams,
) -> Vec<Vec<f64>> {
    let hid = p.hidden_size();
    let d = p.input_size();
    let mut dx_all = vec![vec![0.0; d]; caches.len()];
    let mut dh_next = vec![0.0; hid];
    let mut dc_next = vec![0.0; hid];
    let mut dz = vec![0.0; 4 * hid];
    for t in (0..caches.len()).rev() {
        let cache = &caches[t];
        let gates = &cache.gates;
        for k in 0..hid {
            let (i, f, o, g) = (gates[k], gates[hid + k], gates[2 * hid + k], gates[3 * hid + k]);
            let dh_k = dh[t][k] + dh_next[k];
            let tc = cache.tanh_c[k];
            let d_o = dh_k * tc;
            let dc = dc_next[k] + dh_k * o * (1.0 - tc * tc);
            let d_i = dc * g;
            let d_g = dc * i;
            let d_f = dc * cache.c_prev[k];
            dc_next[k] = dc * f;
            dz[k] = d_i * i * (1.0 - i);
            dz[hid + k] = d_f * f * (1.0 - f);
            dz[2 * hid + k] = d_o * o * (1.0 - o);
            dz[3 * hid + k] = d_g * (1.0 - g * g);
        }
        dh_next.iter_mut().for_each(|v| *v = 0.0);
        let dx = &mut dx_all[t];
        for (r, &dzr) in dz.iter().enumerate() {
            if dzr == 0.0 {
                continue;
            }
            grad.b[r] += dzr;
            let gw = grad.w.row_mut(r);
            for (g, x) in gw.iter_mut().zip(&cache.x) {
                *g += dzr * x;
            }
            for (dxk, w) in dx.iter_mut().zip(p.w.row(r)) {
                *dxk += dzr * w;
            }
            let gu = grad.u.row_mut(r);
            for (g, h) in gu.iter_mut().zip(&cache.h_prev) {
                *g += dzr * h;
            }
            for (dhk, u) in dh_next.iter_mut().zip(p.u.row(r)) {
                *dhk += dzr * u;
            }
        }
    }
    dx_all
}

/// Concatenates forward and backward hidden states for every position,
/// both directions starting from a zero state. Input rows are `T x D`.
pub fn bilstm_encode(xs: &Matrix, fwd: &LstmParams, bwd: &LstmParams) -> Result<Matrix, NeuralError> {
    if xs.cols() != fwd.input_size() || xs.cols() != bwd.input_size() {
        return Err(NeuralError::Shape("input width does not match LSTM input size".into()));
    }
    let rows: Vec<&[f64]> = (0..xs.rows()).map(|t| xs.row(t)).collect();
    let (hf, _) = run(fwd, &rows);
    let reversed: Vec<&[f64]> = rows.iter().rev().copied().collect();
    let (mut hb, _) = run(bwd, &reversed);
    hb.reverse();
    let hid_f = fwd.hidden_size();
    let hid_b = bwd.hidden_size();
    Ok(Matrix::from_fn(xs.rows(), hid_f + hid_b, |t, k| {
        if k < hid_f {
            hf[t][k]
        } else {
            hb[t][k - hid_f]
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Scalar-loop reference cell, gate by gate.
    fn reference_cell(x: &[f64], h: &[f64], c: &[f64], p: &LstmParams) -> (Vec<f64>, Vec<f64>) {
        let hid = h.len();
        let pre = |gate: usize, k: usize| {
            let r = gate * hid + k;
            let mut s = p.b[r];
            for j in 0..x.len() {
                s += p.w.get(r, j) * x[j];
            }
            for j in 0..hid {
                s += p.u.get(r, j) * h[j];
            }
            s
        };
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let mut h2 = vec![0.0; hid];
        let mut c2 = vec![0.0; hid];
        for k in 0..hid {
            let i = sig(pre(0, k));
            let f = sig(pre(1, k));
            let o = sig(pre(2, k));
            let g = pre(3, k).tanh();
            c2[k] = f * c[k] + i * g;
            h2[k] = o * c2[k].tanh();
        }
        (h2, c2)
    }

    #[test]
    fn zero_params() {
        let p = LstmParams::zeros(2, 3);
        let (h, c) = lstm_cell(&[0.0, 0.0], &[0.0; 3], &[0.0; 3], &p).unwrap();
        assert_eq!(h, vec![0.0; 3]);
        assert_eq!(c, vec![0.0; 3]);
        let v = [1.0, -2.0, 0.5];
        let (h, c) = lstm_cell(&[3.0, 4.0], &[0.0; 3], &v, &p).unwrap();
        for k in 0..3 {
            assert_eq!(c[k], 0.5 * v[k]);
            assert_eq!(h[k], 0.5 * (0.5 * v[k]).tanh());
        }
    }

    #[test]
    fn shape_mismatch() {
        let p = LstmParams::zeros(2, 3);
        assert!(lstm_cell(&[0.0], &[0.0; 3], &[0.0; 3], &p).is_err());
        assert!(lstm_cell(&[0.0; 2], &[0.0; 2], &[0.0; 3], &p).is_err());
    }

    #[test]
    fn matches_scalar_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut p = LstmParams::init(2, 3, &mut rng);
        for b in &mut p.b {
            *b += rng.gen_range(-0.5..0.5);
        }
        let x = [0.3, -1.2];
        let h = [0.1, -0.4, 0.7];
        let c = [0.9, 0.2, -0.3];
        let (h1, c1) = lstm_cell(&x, &h, &c, &p).unwrap();
        let (h2, c2) = reference_cell(&x, &h, &c, &p);
        for k in 0..3 {
            assert!((h1[k] - h2[k]).abs() < 1e-12);
            assert!((c1[k] - c2[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn init_has_forget_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = LstmParams::init(4, 5, &mut rng);
        assert_eq!(&p.b[5..10], &[1.0; 5]);
        assert!(p.b[..5].iter().chain(&p.b[10..]).all(|&b| b == 0.0));
        let bound = 1.0 / 5f64.sqrt();
        assert!(p.w.as_slice().iter().all(|w| w.abs() <= bound));
    }

    #[test]
    fn bilstm_zero_and_palindrome() {
        let zero = LstmParams::zeros(2, 3);
        let xs = Matrix::from_vec(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(bilstm_encode(&xs, &zero, &zero).unwrap(), Matrix::zeros(3, 6));

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = LstmParams::init(2, 3, &mut rng);
        let pal = Matrix::from_vec(5, 2, vec![1.0, -1.0, 0.5, 2.0, -0.3, 0.0, 0.5, 2.0, 1.0, -1.0]);
        let out = bilstm_encode(&pal, &p, &p).unwrap();
        for t in 0..5 {
            for k in 0..3 {
                assert!((out.get(t, k) - out.get(4 - t, 3 + k)).abs() < 1e-15);
            }
        }

        let single = Matrix::from_vec(1, 2, vec![0.2, 0.4]);
        let q = LstmParams::init(2, 3, &mut rng);
        let out = bilstm_encode(&single, &p, &q).unwrap();
        let (hf, _) = lstm_cell(&[0.2, 0.4], &[0.0; 3], &[0.0; 3], &p).unwrap();
        let (hb, _) = lstm_cell(&[0.2, 0.4], &[0.0; 3], &[0.0; 3], &q).unwrap();
        assert_eq!(&out.row(0)[..3], &hf[..]);
        assert_eq!(&out.row(0)[3..], &hb[..]);
    }
}
