//! Linear-chain CRF over `T × K` emission scores and `K × K` transition
//! scores (`transitions[i][j]` scores tag `i` followed by tag `j`).

use alloc::vec;
use alloc::vec::Vec;

use super::ops::logsumexp;
use super::{Array, NeuralError};
use crate::math;

fn check(emissions: &Array, transitions: &Array) -> Result<(usize, usize), NeuralError> {
    if emissions.shape().len() != 2 {
        return Err(NeuralError::Shape { expected: vec![0, 0], actual: emissions.shape().to_vec() });
    }
    let (t, k) = (emissions.rows(), emissions.cols());
    if t < 1 || k < 2 {
        return Err(NeuralError::CrfSize { steps: t, tags: k });
    }
    if transitions.shape() != [k, k] {
        return Err(NeuralError::Shape { expected: vec![k, k], actual: transitions.shape().to_vec() });
    }
    if !emissions.is_finite() {
        return Err(NeuralError::NonFinite("emissions".into()));
    }
    if transitions.data().iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
        return Err(NeuralError::NonFinite("transitions".into()));
    }
    Ok((t, k))
}

/// Forward log-messages `alpha[t][j]`.
fn forward(emissions: &Array, transitions: &Array, t_len: usize, k: usize) -> Vec<Vec<f64>> {
    let mut alpha = vec![emissions.row(0).to_vec()];
    let mut buf = vec![0.0; k];
    for t in 1..t_len {
        let prev = &alpha[t - 1];
        let row: Vec<f64> = (0..k)
            .map(|j| {
                for i in 0..k {
                    buf[i] = prev[i] + transitions.get2(i, j);
                }
                logsumexp(&buf) + emissions.get2(t, j)
            })
            .collect();
        alpha.push(row);
    }
    alpha
}

fn backward(emissions: &Array, transitions: &Array, t_len: usize, k: usize) -> Vec<Vec<f64>> {
    let mut beta = vec![vec![0.0; k]; t_len];
    let mut buf = vec![0.0; k];
    for t in (0..t_len - 1).rev() {
        for i in 0..k {
            for j in 0..k {
                buf[j] = transitions.get2(i, j) + emissions.get2(t + 1, j) + beta[t + 1][j];
            }
            beta[t][i] = logsumexp(&buf);
        }
    }
    beta
}

/// `log Z`: log-sum-exp over all `K^T` tag paths of the path score.
pub fn crf_log_partition(emissions: &Array, transitions: &Array) -> Result<f64, NeuralError> {
    let (t, k) = check(emissions, transitions)?;
    Ok(logsumexp(&forward(emissions, transitions, t, k)[t - 1]))
}

pub fn crf_path_score(emissions: &Array, transitions: &Array, path: &[usize]) -> f64 {
    let mut s = 0.0;
    for (t, &tag) in path.iter().enumerate() {
        s += emissions.get2(t, tag);
        if t > 0 {
            s += transitions.get2(path[t - 1], tag);
        }
    }
    s
}

/// Per-position tag posteriors (`T × K`).
pub fn crf_marginals(emissions: &Array, transitions: &Array) -> Result<Array, NeuralError> {
    let (t_len, k) = check(emissions, transitions)?;
    let alpha = forward(emissions, transitions, t_len, k);
    let beta = backward(emissions, transitions, t_len, k);
    let log_z = logsumexp(&alpha[t_len - 1]);
    let mut out = Array::zeros(&[t_len, k]);
    for t in 0..t_len {
        for j in 0..k {
            out.data_mut()[t * k + j] = math::exp(alpha[t][j] + beta[t][j] - log_z);
        }
    }
    Ok(out)
}

/// Gradients of the negative log-likelihood.
#[derive(Debug, Clone, PartialEq)]
pub struct CrfGradients {
    pub emissions: Array,
    pub transitions: Array,
}

/// Negative log-likelihood `log Z − score(gold)` and its gradients.
#[allow(clippy::needless_range_loop)]
pub fn crf_nll(emissions: &Array, transitions: &Array, gold: &[usize]) -> Result<(f64, CrfGradients), NeuralError> {
    let (t_len, k) = check(emissions, transitions)?;
    if gold.len() != t_len || gold.iter().any(|&g| g >= k) {
        return Err(NeuralError::Shape { expected: vec![t_len], actual: vec![gold.len()] });
    }
    let alpha = forward(emissions, transitions, t_len, k);
    let beta = backward(emissions, transitions, t_len, k);
    let log_z = logsumexp(&alpha[t_len - 1]);
    let nll = log_z - crf_path_score(emissions, transitions, gold);

    let mut d_em = Array::zeros(&[t_len, k]);
    let mut d_tr = Array::zeros(&[k, k]);
    for t in 0..t_len {
        for j in 0..k {
            d_em.data_mut()[t * k + j] = math::exp(alpha[t][j] + beta[t][j] - log_z);
        }
        d_em.data_mut()[t * k + gold[t]] -= 1.0;
    }
    for t in 1..t_len {
        for i in 0..k {
            for j in 0..k {
                let lp = alpha[t - 1][i] + transitions.get2(i, j) + emissions.get2(t, j) + beta[t][j] - log_z;
                d_tr.data_mut()[i * k + j] += math::exp(lp);
            }
        }
        d_tr.data_mut()[gold[t - 1] * k + gold[t]] -= 1.0;
    }
    Ok((nll, CrfGradients { emissions: d_em, transitions: d_tr }))
}

/// Highest-scoring tag path and its score; ties go to the lowest tag index.
pub fn crf_viterbi(emissions: &Array, transitions: &Array) -> Result<(Vec<usize>, f64), NeuralError> {
    crf_viterbi_constrained(emissions, transitions, None, None)
}

/// Viterbi restricted by an optional start mask and allowed-transition mask
/// (`allowed[i * K + j]`).
#[allow(clippy::needless_range_loop)]
pub fn crf_viterbi_constrained(
    emissions: &Array,
    transitions: &Array,
    start_allowed: Option<&[bool]>,
    allowed: Option<&[bool]>,
) -> Result<(Vec<usize>, f64), NeuralError> {
    let (t_len, k) = check(emissions, transitions)?;
    let mut score: Vec<f64> = (0..k)
        .map(|j| match start_allowed {
            Some(mask) if !mask[j] => f64::NEG_INFINITY,
            _ => emissions.get2(0, j),
        })
        .collect();
    let mut back = vec![vec![0usize; k]; t_len];
    for t in 1..t_len {
        let mut next = vec![f64::NEG_INFINITY; k];
        for j in 0..k {
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0;
            for i in 0..k {
                if allowed.is_some_and(|a| !a[i * k + j]) {
                    continue;
                }
                let s = score[i] + transitions.get2(i, j);
                if s > best {
                    best = s;
                    arg = i;
                }
            }
            back[t][j] = arg;
            next[j] = best + emissions.get2(t, j);
        }
        score = next;
    }
    let mut last = 0;
    for j in 1..k {
        if score[j] > score[last] {
            last = j;
        }
    }
    let best = score[last];
    let mut path = vec![0; t_len];
    path[t_len - 1] = last;
    for t in (1..t_len).rev() {
        path[t - 1] = back[t][path[t]];
    }
    Ok((path, best))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::Rng as _;

    fn random(rng: &mut crate::rng::Rng, t: usize, k: usize) -> (Array, Array) {
        let em = Array::from_vec(&[t, k], (0..t * k).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap();
        let tr = Array::from_vec(&[k, k], (0..k * k).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap();
        (em, tr)
    }

    /// Every tag path of length `t` over `k` tags.
    fn all_paths(t: usize, k: usize) -> Vec<Vec<usize>> {
        let mut paths = vec![Vec::new()];
        for _ in 0..t {
            paths = paths
                .into_iter()
                .flat_map(|p| {
                    (0..k).map(move |j| {
                        let mut q = p.clone();
                        q.push(j);
                        q
                    })
                })
                .collect();
        }
        paths
    }

    #[test]
    fn single_step_two_tags() {
        let em = Array::zeros(&[1, 2]);
        let tr = Array::zeros(&[2, 2]);
        assert!((crf_log_partition(&em, &tr).unwrap() - core::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn partition_and_viterbi_match_enumeration() {
        let mut rng = seeded(42);
        for t in 1..=5 {
            for k in 2..=4 {
                let (em, tr) = random(&mut rng, t, k);
                let scores: Vec<f64> = all_paths(t, k).iter().map(|p| crf_path_score(&em, &tr, p)).collect();
                let log_z = crf_log_partition(&em, &tr).unwrap();
                assert!((log_z - logsumexp(&scores)).abs() < 1e-9);
                let (path, best) = crf_viterbi(&em, &tr).unwrap();
                let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                assert!((best - max).abs() < 1e-12);
                assert!((crf_path_score(&em, &tr, &path) - max).abs() < 1e-12);
                assert!(best <= log_z);
                let total: f64 = scores.iter().map(|s| math::exp(s - log_z)).sum();
                assert!((total - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn marginals_sum_to_one() {
        let mut rng = seeded(7);
        let (em, tr) = random(&mut rng, 6, 3);
        let m = crf_marginals(&em, &tr).unwrap();
        for t in 0..6 {
            assert!((m.row(t).iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn ties_break_to_lowest_index() {
        let em = Array::zeros(&[3, 3]);
        let tr = Array::zeros(&[3, 3]);
        assert_eq!(crf_viterbi(&em, &tr).unwrap().0, [0, 0, 0]);
    }

    #[test]
    fn constrained_decode_respects_masks() {
        let em = Array::from_vec(&[2, 2], vec![0.0, 5.0, 0.0, 5.0]).unwrap();
        let tr = Array::zeros(&[2, 2]);
        let (path, _) = crf_viterbi_constrained(&em, &tr, Some(&[true, false]), Some(&[true, true, true, false])).unwrap();
        assert_eq!(path, [0, 1]);
    }

    #[test]
    fn rejects_bad_input() {
        let tr = Array::zeros(&[2, 2]);
        let mut em = Array::zeros(&[2, 2]);
        em.data_mut()[1] = f64::NAN;
        assert!(matches!(crf_log_partition(&em, &tr), Err(NeuralError::NonFinite(_))));
        assert!(matches!(
            crf_log_partition(&Array::zeros(&[2, 1]), &Array::zeros(&[1, 1])),
            Err(NeuralError::CrfSize { .. })
        ));
    }
}
