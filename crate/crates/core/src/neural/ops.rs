//! Slice-level kernels and their backward rules.

use alloc::vec;
use alloc::vec::Vec;

use super::{Array, NeuralError};
use crate::math;

/// `out = W x` for row-major `W` with `rows × x.len()` entries.
pub fn matvec(w: &[f64], x: &[f64], out: &mut [f64]) {
    let cols = x.len();
    debug_assert_eq!(w.len(), out.len() * cols);
    for (o, row) in out.iter_mut().zip(w.chunks_exact(cols)) {
        *o = dot(row, x);
    }
}

/// `out += Wᵀ dy`.
pub fn matvec_t_acc(w: &[f64], dy: &[f64], out: &mut [f64]) {
    let cols = out.len();
    debug_assert_eq!(w.len(), dy.len() * cols);
    for (g, row) in dy.iter().zip(w.chunks_exact(cols)) {
        if *g == 0.0 {
            continue;
        }
        for (o, r) in out.iter_mut().zip(row) {
            *o += g * r;
        }
    }
}

/// `G += dy xᵀ`.
pub fn outer_acc(g: &mut [f64], dy: &[f64], x: &[f64]) {
    let cols = x.len();
    debug_assert_eq!(g.len(), dy.len() * cols);
    for (d, row) in dy.iter().zip(g.chunks_exact_mut(cols)) {
        if *d == 0.0 {
            continue;
        }
        for (gr, xv) in row.iter_mut().zip(x) {
            *gr += d * xv;
        }
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn add_assign(a: &mut [f64], b: &[f64]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
}

pub fn tanh_in_place(x: &mut [f64]) {
    x.iter_mut().for_each(|v| *v = math::tanh(*v));
}

pub fn sigmoid_in_place(x: &mut [f64]) {
    x.iter_mut().for_each(|v| *v = math::sigmoid(*v));
}

pub fn tanh(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| math::tanh(*v)).collect()
}

pub fn sigmoid(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| math::sigmoid(*v)).collect()
}

/// Gradient through `y = tanh(a)` given the output `y`.
pub fn tanh_backward(y: &[f64], dy: &[f64]) -> Vec<f64> {
    y.iter().zip(dy).map(|(y, d)| d * (1.0 - y * y)).collect()
}

/// Gradient through `y = σ(a)` given the output `y`.
pub fn sigmoid_backward(y: &[f64], dy: &[f64]) -> Vec<f64> {
    y.iter().zip(dy).map(|(y, d)| d * y * (1.0 - y)).collect()
}

pub fn logsumexp(x: &[f64]) -> f64 {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + math::ln(x.iter().map(|v| math::exp(v - m)).sum::<f64>())
}

pub fn softmax(x: &[f64]) -> Vec<f64> {
    let lse = logsumexp(x);
    x.iter().map(|v| math::exp(v - lse)).collect()
}

pub fn log_softmax(x: &[f64]) -> Vec<f64> {
    let lse = logsumexp(x);
    x.iter().map(|v| v - lse).collect()
}

/// Gradient through `p = softmax(a)` given `p` and `dp`.
pub fn softmax_backward(p: &[f64], dp: &[f64]) -> Vec<f64> {
    let s = dot(p, dp);
    p.iter().zip(dp).map(|(p, d)| p * (d - s)).collect()
}

/// Gradient of `logsumexp(x)` is `softmax(x)`.
pub fn logsumexp_backward(x: &[f64], dy: f64) -> Vec<f64> {
    softmax(x).into_iter().map(|p| p * dy).collect()
}

/// Row-wise softmax of a 2-D array.
pub fn softmax_rows(x: &Array) -> Array {
    let mut out = x.clone();
    for i in 0..x.rows() {
        let p = softmax(x.row(i));
        out.row_mut(i).copy_from_slice(&p);
    }
    out
}

/// `W x + b` with shape checks; `W` is `out × in`.
pub fn linear(w: &Array, b: &Array, x: &[f64]) -> Result<Vec<f64>, NeuralError> {
    if w.shape().len() != 2 || w.shape()[1] != x.len() {
        return Err(NeuralError::Shape { expected: vec![w.rows(), x.len()], actual: w.shape().to_vec() });
    }
    if b.shape() != [w.rows()] {
        return Err(NeuralError::Shape { expected: vec![w.rows()], actual: b.shape().to_vec() });
    }
    let mut out = vec![0.0; w.rows()];
    matvec(w.data(), x, &mut out);
    add_assign(&mut out, b.data());
    Ok(out)
}

/// Gradients of `W x + b`: returns `(dW, db, dx)`.
pub fn linear_backward(w: &Array, x: &[f64], dy: &[f64]) -> (Array, Array, Vec<f64>) {
    let mut dw = Array::zeros(w.shape());
    outer_acc(dw.data_mut(), dy, x);
    let db = Array::from_vec(&[dy.len()], dy.to_vec()).expect("non-empty");
    let mut dx = vec![0.0; x.len()];
    matvec_t_acc(w.data(), dy, &mut dx);
    (dw, db, dx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_linear() {
        let x = [0.3, -1.0, 2.5];
        let y = linear(&Array::identity(3), &Array::zeros(&[3]), &x).unwrap();
        assert_eq!(y, x);
        assert!(linear(&Array::identity(2), &Array::zeros(&[2]), &x).is_err());
    }

    #[test]
    fn softmax_and_logsumexp() {
        let p = softmax(&[0.5; 7]);
        for v in &p {
            assert!((v - 1.0 / 7.0).abs() < 1e-15);
        }
        assert!((logsumexp(&[0.0, 0.0]) - core::f64::consts::LN_2).abs() < 1e-15);
        let big = softmax(&[1000.0, 0.0, -1000.0]);
        assert!((big.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((logsumexp(&[1000.0, 1000.0]) - (1000.0 + core::f64::consts::LN_2)).abs() < 1e-9);
    }

    #[test]
    fn softmax_rows_normalize() {
        let a = Array::from_vec(&[2, 3], alloc::vec![1.0, 2.0, 3.0, -4.0, 0.0, 9.0]).unwrap();
        let s = softmax_rows(&a);
        for i in 0..2 {
            assert!((s.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
