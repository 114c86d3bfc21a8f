//! Exact inference over a linear chain: forward recursion, Viterbi, and
//! forward-backward marginals. Emissions are `T x L`, transitions `L x L`
//! indexed `(from, to)`. There are no start or stop transitions.

use crate::matrix::{log_sum_exp, Matrix};

use super::CrfError;

fn check(emissions: &Matrix, transitions: &Matrix) -> Result<(), CrfError> {
    if emissions.rows() == 0 {
        return Err(CrfError::EmptySequence);
    }
    let l = emissions.cols();
    if transitions.shape() != (l, l) {
        return Err(CrfError::Shape(format!(
            "transitions are {:?}, expected {l}x{l}",
            transitions.shape()
        )));
    }
    Ok(())
}

/// Unnormalized score of one label path.
pub fn path_score(emissions: &Matrix, transitions: &Matrix, path: &[usize]) -> f64 {
    let mut score = 0.0;
    for (t, &y) in path.iter().enumerate() {
        score += emissions.get(t, y);
        if t > 0 {
            score += transitions.get(path[t - 1], y);
        }
    }
    score
}

/// Forward log-scores `alpha[t, y]`.
fn forward(emissions: &Matrix, transitions: &Matrix) -> Matrix {
    let (t_len, l) = emissions.shape();
    let mut alpha = Matrix::zeros(t_len, l);
    alpha.row_mut(0).copy_from_slice(emissions.row(0));
    let mut buf = vec![0.0; l];
    for t in 1..t_len {
        for y in 0..l {
            for (prev, b) in buf.iter_mut().enumerate() {
                *b = alpha.get(t - 1, prev) + transitions.get(prev, y);
            }
            alpha.set(t, y, emissions.get(t, y) + log_sum_exp(&buf));
        }
    }
    alpha
}

/// Backward log-scores `beta[t, y]`, with `beta[T-1, .] = 0`.
fn backward(emissions: &Matrix, transitions: &Matrix) -> Matrix {
    let (t_len, l) = emissions.shape();
    let mut beta = Matrix::zeros(t_len, l);
    let mut buf = vec![0.0; l];
    for t in (0..t_len - 1).rev() {
        for y in 0..l {
            for (next, b) in buf.iter_mut().enumerate() {
                *b = transitions.get(y, next) + emissions.get(t + 1, next) + beta.get(t + 1, next);
            }
            beta.set(t, y, log_sum_exp(&buf));
        }
    }
    beta
}

/// Log of the partition function: log-sum over all `L^T` paths of the
/// exponentiated path score.
pub fn log_partition(emissions: &Matrix, transitions: &Matrix) -> Result<f64, CrfError> {
    check(emissions, transitions)?;
    let alpha = forward(emissions, transitions);
    Ok(log_sum_exp(alpha.row(emissions.rows() - 1)))
}

/// Highest-scoring label path and its score. Ties go to the lower label
/// index.
pub fn viterbi(emissions: &Matrix, transitions: &Matrix) -> Result<(Vec<usize>, f64), CrfError> {
    check(emissions, transitions)?;
    let (t_len, l) = emissions.shape();
    let mut delta = emissions.row(0).to_vec();
    let mut back = vec![0usize; t_len * l];
    let mut next = vec![0.0; l];
    for t in 1..t_len {
        for y in 0..l {
            let mut best = 0;
            let mut best_score = delta[0] + transitions.get(0, y);
            for (prev, &d) in delta.iter().enumerate().skip(1) {
                let s = d + transitions.get(prev, y);
                if s > best_score {
                    best = prev;
                    best_score = s;
                }
            }
            back[t * l + y] = best;
            next[y] = best_score + emissions.get(t, y);
        }
        std::mem::swap(&mut delta, &mut next);
    }
    let last = crate::matrix::argmax(&delta);
    let score = delta[last];
    let mut path = vec![0; t_len];
    path[t_len - 1] = last;
    for t in (1..t_len).rev() {
        path[t - 1] = back[t * l + path[t]];
    }
    Ok((path, score))
}

#[derive(Clone, Debug)]
pub struct Marginals {
    /// `node[t, y] = P(y_t = y)`.
    pub node: Matrix,
    /// `edge[t][(y, y')] = P(y_t = y, y_{t+1} = y')`, `T - 1` entries.
    pub edge: Vec<Matrix>,
    pub log_z: f64,
}

pub fn marginals(emissions: &Matrix, transitions: &Matrix) -> Result<Marginals, CrfError> {
    check(emissions, transitions)?;
    let (t_len, l) = emissions.shape();
    let alpha = forward(emissions, transitions);
    let beta = backward(emissions, transitions);
    let log_z = log_sum_exp(alpha.row(t_len - 1));
    let node = Matrix::from_fn(t_len, l, |t, y| (alpha.get(t, y) + beta.get(t, y) - log_z).exp());
    let edge = (0..t_len - 1)
        .map(|t| {
            Matrix::from_fn(l, l, |y, y2| {
                (alpha.get(t, y)
                    + transitions.get(y, y2)
                    + emissions.get(t + 1, y2)
                    + beta.get(t + 1, y2)
                    - log_z)
                    .exp()
            })
        })
        .collect();
    Ok(Marginals { node, edge, log_z })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Every label path of length `t_len` over `l` labels.
    pub(crate) fn all_paths(t_len: usize, l: usize) -> Vec<Vec<usize>> {
        let mut paths = vec![vec![]];
        for _ in 0..t_len {
            paths = paths
                .into_iter()
                .flat_map(|p| {
                    (0..l).map(move |y| {
                        let mut q = p.clone();
                        q.push(y);
                        q
                    })
                })
                .collect();
        }
        paths
    }

    fn random_instance(rng: &mut ChaCha8Rng) -> (Matrix, Matrix) {
        let t_len = rng.gen_range(1..=5);
        let l = rng.gen_range(2..=4);
        let em = Matrix::from_fn(t_len, l, |_, _| rng.gen_range(-2.0..2.0));
        let tr = Matrix::from_fn(l, l, |_, _| rng.gen_range(-2.0..2.0));
        (em, tr)
    }

    #[test]
    fn zero_scores() {
        let em = Matrix::zeros(4, 3);
        let tr = Matrix::zeros(3, 3);
        assert!((log_partition(&em, &tr).unwrap() - 4.0 * 3f64.ln()).abs() < 1e-12);
        let (path, score) = viterbi(&em, &tr).unwrap();
        assert_eq!(path, vec![0, 0, 0, 0]);
        assert_eq!(score, 0.0);
        let m = marginals(&em, &tr).unwrap();
        for t in 0..4 {
            for y in 0..3 {
                assert!((m.node.get(t, y) - 1.0 / 3.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_position() {
        let em = Matrix::from_vec(1, 3, vec![0.5, 2.0, 2.0]);
        let tr = Matrix::from_vec(3, 3, vec![9.0; 9]);
        let z = log_partition(&em, &tr).unwrap();
        let expected = (0.5f64.exp() + 2.0 * 2f64.exp()).ln();
        assert!((z - expected).abs() < 1e-12);
        assert_eq!(viterbi(&em, &tr).unwrap(), (vec![1], 2.0));
        let m = marginals(&em, &tr).unwrap();
        assert!(m.edge.is_empty());
        assert!((m.node.get(0, 0) - 0.5f64.exp() / expected.exp()).abs() < 1e-12);
    }

    #[test]
    fn empty_sequence_is_error() {
        let em = Matrix::zeros(0, 3);
        let tr = Matrix::zeros(3, 3);
        assert!(matches!(log_partition(&em, &tr), Err(CrfError::EmptySequence)));
        assert!(matches!(viterbi(&em, &tr), Err(CrfError::EmptySequence)));
        assert!(matches!(marginals(&em, &tr), Err(CrfError::EmptySequence)));
    }

    #[test]
    fn matches_path_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let (em, tr) = random_instance(&mut rng);
            let (t_len, l) = em.shape();
            let scores: Vec<f64> = all_paths(t_len, l)
                .iter()
                .map(|p| path_score(&em, &tr, p))
                .collect();
            let brute_z = scores.iter().map(|s| s.exp()).sum::<f64>().ln();
            assert!((log_partition(&em, &tr).unwrap() - brute_z).abs() < 1e-10);
            let brute_max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let (path, score) = viterbi(&em, &tr).unwrap();
            assert!((score - brute_max).abs() < 1e-12);
            assert!((path_score(&em, &tr, &path) - score).abs() < 1e-12);
            assert!(brute_z >= brute_max);
        }
    }

    #[test]
    fn marginals_are_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..30 {
            let (em, tr) = random_instance(&mut rng);
            let (t_len, l) = em.shape();
            let m = marginals(&em, &tr).unwrap();
            for t in 0..t_len {
                let s: f64 = m.node.row(t).iter().sum();
                assert!((s - 1.0).abs() < 1e-9);
            }
            for (t, e) in m.edge.iter().enumerate() {
                assert!((e.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-9);
                for y in 0..l {
                    let out: f64 = e.row(y).iter().sum();
                    assert!((out - m.node.get(t, y)).abs() < 1e-9);
                    let inc: f64 = (0..l).map(|p| e.get(p, y)).sum();
                    assert!((inc - m.node.get(t + 1, y)).abs() < 1e-9);
                }
            }
        }
    }
}
