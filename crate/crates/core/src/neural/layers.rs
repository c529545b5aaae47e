use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::ops;
use super::{Gradients, ParamId, ParamStore};
use crate::rng::Rng;

/// Affine map `W x + b` backed by a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new(store: &mut ParamStore, name: &str, in_dim: usize, out_dim: usize, bias: bool) -> Linear {
        let weight = store.add_matrix(&alloc::format!("{name}.weight"), out_dim, in_dim, in_dim);
        let bias = bias.then(|| store.add_zeros(&alloc::format!("{name}.bias"), &[out_dim]));
        Linear { weight, bias, in_dim, out_dim }
    }

    pub fn forward(&self, store: &ParamStore, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.out_dim];
        self.forward_into(store, x, &mut out);
        out
    }

    pub fn forward_into(&self, store: &ParamStore, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.in_dim);
        ops::matvec(store.get(self.weight).data(), x, out);
        if let Some(b) = self.bias {
            ops::add_assign(out, store.get(b).data());
        }
    }

    /// Accumulates parameter gradients and, if requested, `dx += Wᵀ dy`.
    pub fn backward(&self, store: &ParamStore, grads: &mut Gradients, x: &[f64], dy: &[f64], dx: Option<&mut [f64]>) {
        ops::outer_acc(grads.buf(self.weight), dy, x);
        if let Some(b) = self.bias {
            ops::add_assign(grads.buf(b), dy);
        }
        if let Some(dx) = dx {
            ops::matvec_t_acc(store.get(self.weight).data(), dy, dx);
        }
    }
}

/// Token embedding table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub table: ParamId,
    pub vocab: usize,
    pub dim: usize,
}

impl Embedding {
    pub fn new(store: &mut ParamStore, name: &str, vocab: usize, dim: usize) -> Embedding {
        let table = store.add_matrix(name, vocab, dim, dim);
        Embedding { table, vocab, dim }
    }

    pub fn lookup<'a>(&self, store: &'a ParamStore, token: usize) -> &'a [f64] {
        store.get(self.table).row(token)
    }

    pub fn backward(&self, grads: &mut Gradients, token: usize, dy: &[f64]) {
        let row = &mut grads.get_mut(self.table).row_mut(token)[..];
        ops::add_assign(row, dy);
    }
}

/// Inverted-dropout mask: entries are `0` or `1 / (1 − rate)`.
pub fn dropout_mask(rng: &mut Rng, len: usize, rate: f64) -> Vec<f64> {
    if rate <= 0.0 {
        return vec![1.0; len];
    }
    let keep = 1.0 / (1.0 - rate);
    (0..len).map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep }).collect()
}
