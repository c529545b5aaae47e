use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::ops;
use super::{Gradients, ParamId, ParamStore};
use crate::math;

/// Gated recurrent unit with gates stacked `[z; r; h]` in `W` (3H × I),
/// `U` (3H × H) and `b` (3H):
///
/// ```text
/// z  = σ(W_z x + U_z h + b_z)
/// r  = σ(W_r x + U_r h + b_r)
/// h̃  = tanh(W_h x + U_h (r ⊙ h) + b_h)
/// h' = (1 − z) ⊙ h + z ⊙ h̃
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GruCell {
    pub w: ParamId,
    pub u: ParamId,
    pub b: ParamId,
    pub input: usize,
    pub hidden: usize,
}

/// Activations of one step, kept for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct GruStepCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    pub h_tilde: Vec<f64>,
    pub h: Vec<f64>,
}

impl GruCell {
    pub fn new(store: &mut ParamStore, name: &str, input: usize, hidden: usize) -> GruCell {
        let w = store.add_matrix(&alloc::format!("{name}.w"), 3 * hidden, input, input);
        let u = store.add_matrix(&alloc::format!("{name}.u"), 3 * hidden, hidden, hidden);
        let b = store.add_zeros(&alloc::format!("{name}.b"), &[3 * hidden]);
        GruCell { w, u, b, input, hidden }
    }

    pub fn step(&self, store: &ParamStore, x: &[f64], h_prev: &[f64]) -> GruStepCache {
        let hd = self.hidden;
        let w = store.get(self.w).data();
        let u = store.get(self.u).data();
        let b = store.get(self.b).data();
        let mut wx = vec![0.0; 3 * hd];
        ops::matvec(w, x, &mut wx);
        let mut uh = vec![0.0; 2 * hd];
        ops::matvec(&u[..2 * hd * hd], h_prev, &mut uh);
        let z: Vec<f64> = (0..hd).map(|i| math::sigmoid(wx[i] + uh[i] + b[i])).collect();
        let r: Vec<f64> = (0..hd).map(|i| math::sigmoid(wx[hd + i] + uh[hd + i] + b[hd + i])).collect();
        let rh: Vec<f64> = r.iter().zip(h_prev).map(|(r, h)| r * h).collect();
        let mut urh = vec![0.0; hd];
        ops::matvec(&u[2 * hd * hd..], &rh, &mut urh);
        let h_tilde: Vec<f64> = (0..hd).map(|i| math::tanh(wx[2 * hd + i] + urh[i] + b[2 * hd + i])).collect();
        let h: Vec<f64> = (0..hd).map(|i| (1.0 - z[i]) * h_prev[i] + z[i] * h_tilde[i]).collect();
        GruStepCache { x: x.to_vec(), h_prev: h_prev.to_vec(), z, r, h_tilde, h }
    }

    /// Backpropagates `dh` through one step. Accumulates parameter gradients
    /// and returns `(dx, dh_prev)`.
    pub fn step_backward(
        &self,
        store: &ParamStore,
        grads: &mut Gradients,
        cache: &GruStepCache,
        dh: &[f64],
    ) -> (Vec<f64>, Vec<f64>) {
        let hd = self.hidden;
        let w = store.get(self.w).data();
        let u = store.get(self.u).data();
        let GruStepCache { x, h_prev, z, r, h_tilde, .. } = cache;

        let mut da = vec![0.0; 3 * hd];
        let mut dh_prev = vec![0.0; hd];
        for i in 0..hd {
            let dz = dh[i] * (h_tilde[i] - h_prev[i]);
            da[i] = dz * z[i] * (1.0 - z[i]);
            da[2 * hd + i] = dh[i] * z[i] * (1.0 - h_tilde[i] * h_tilde[i]);
            dh_prev[i] = dh[i] * (1.0 - z[i]);
        }
        let rh: Vec<f64> = r.iter().zip(h_prev).map(|(r, h)| r * h).collect();
        let mut drh = vec![0.0; hd];
        ops::matvec_t_acc(&u[2 * hd * hd..], &da[2 * hd..], &mut drh);
        for i in 0..hd {
            da[hd + i] = drh[i] * h_prev[i] * r[i] * (1.0 - r[i]);
            dh_prev[i] += drh[i] * r[i];
        }
        ops::matvec_t_acc(&u[..2 * hd * hd], &da[..2 * hd], &mut dh_prev);

        let mut dx = vec![0.0; self.input];
        ops::matvec_t_acc(w, &da, &mut dx);
        ops::outer_acc(grads.buf(self.w), &da, x);
        let gu = grads.buf(self.u);
        ops::outer_acc(&mut gu[..2 * hd * hd], &da[..2 * hd], h_prev);
        ops::outer_acc(&mut gu[2 * hd * hd..], &da[2 * hd..], &rh);
        ops::add_assign(grads.buf(self.b), &da);
        (dx, dh_prev)
    }

    /// Runs the cell over `inputs` from a zero initial state.
    pub fn run<'a, I: IntoIterator<Item = &'a [f64]>>(&self, store: &ParamStore, inputs: I) -> GruSequence {
        let mut steps = Vec::new();
        let mut h = vec![0.0; self.hidden];
        for x in inputs {
            let cache = self.step(store, x, &h);
            h.clone_from(&cache.h);
            steps.push(cache);
        }
        GruSequence { steps }
    }

    /// Backpropagation through time. `dhs[t]` is the loss gradient flowing
    /// into the output at step `t`; returns the input gradients.
    pub fn run_backward(
        &self,
        store: &ParamStore,
        grads: &mut Gradients,
        seq: &GruSequence,
        dhs: &[Vec<f64>],
    ) -> Vec<Vec<f64>> {
        let mut dxs = vec![Vec::new(); seq.steps.len()];
        let mut carry = vec![0.0; self.hidden];
        for t in (0..seq.steps.len()).rev() {
            ops::add_assign(&mut carry, &dhs[t]);
            let (dx, dh_prev) = self.step_backward(store, grads, &seq.steps[t], &carry);
            dxs[t] = dx;
            carry = dh_prev;
        }
        dxs
    }
}

/// Cached forward pass over a sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct GruSequence {
    pub steps: Vec<GruStepCache>,
}

impl GruSequence {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn output(&self, t: usize) -> &[f64] {
        &self.steps[t].h
    }
}
