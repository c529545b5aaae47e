use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{Gradients, NeuralError, ParamStore};
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    steps: u64,
}

impl Adam {
    pub fn new(config: AdamConfig, store: &ParamStore) -> Adam {
        let zeros: Vec<Vec<f64>> = store.iter().map(|(_, _, a)| alloc::vec![0.0; a.len()]).collect();
        Adam { config, m: zeros.clone(), v: zeros, steps: 0 }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Applies one update. Fails without touching any parameter if a
    /// gradient is non-finite.
    pub fn step(&mut self, store: &mut ParamStore, grads: &Gradients) -> Result<(), NeuralError> {
        for (id, g) in grads.iter() {
            if !g.is_finite() {
                return Err(NeuralError::NonFiniteGradient(store.name(id).into()));
            }
        }
        self.steps += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let c1 = 1.0 - math::powf(beta1, self.steps as f64);
        let c2 = 1.0 - math::powf(beta2, self.steps as f64);
        for (id, g) in grads.iter() {
            let m = &mut self.m[id.0];
            let v = &mut self.v[id.0];
            let p = store.get_mut(id).data_mut();
            for (i, &gi) in g.data().iter().enumerate() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
                v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= lr * m_hat / (math::sqrt(v_hat) + eps);
            }
        }
        Ok(())
    }
}

/// Rescales gradients so their global L2 norm is at most `max_norm`;
/// returns the norm before clipping.
pub fn clip_grad_norm(grads: &mut Gradients, max_norm: f64) -> f64 {
    let norm = grads.norm();
    if norm > max_norm && norm > 0.0 {
        grads.scale(max_norm / norm);
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store() -> ParamStore {
        let mut s = ParamStore::new(5);
        s.add_matrix("w", 2, 3, 3);
        s.add_zeros("b", &[2]);
        s
    }

    #[test]
    fn zero_gradient_keeps_parameters() {
        let mut s = store();
        let before = s.clone();
        let mut adam = Adam::new(AdamConfig::default(), &s);
        let g = s.gradients();
        adam.step(&mut s, &g).unwrap();
        for ((_, _, a), (_, _, b)) in s.iter().zip(before.iter()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut s = store();
        let before = s.clone();
        let mut g = s.gradients();
        for (i, x) in g.buf(super::super::ParamId(0)).iter_mut().enumerate() {
            *x = if i % 2 == 0 { 0.37 } else { -2.0 };
        }
        let cfg = AdamConfig { lr: 0.01, ..Default::default() };
        let mut adam = Adam::new(cfg, &s);
        adam.step(&mut s, &g).unwrap();
        // m̂ = g and v̂ = g², so each update is lr · g / (|g| + ε).
        for (a, b) in s.get(super::super::ParamId(0)).data().iter().zip(before.get(super::super::ParamId(0)).data()) {
            assert!(((b - a).abs() - 0.01).abs() < 1e-8);
        }
    }

    #[test]
    fn non_finite_gradient_is_named() {
        let mut s = store();
        let mut g = s.gradients();
        g.buf(super::super::ParamId(1))[0] = f64::NAN;
        let mut adam = Adam::new(AdamConfig::default(), &s);
        assert_eq!(adam.step(&mut s, &g), Err(NeuralError::NonFiniteGradient("b".into())));
        assert_eq!(adam.steps(), 0);
    }

    #[test]
    fn clipping() {
        let s = store();
        let mut g = s.gradients();
        g.buf(super::super::ParamId(1)).copy_from_slice(&[3.0, 4.0]);
        assert_eq!(clip_grad_norm(&mut g, 0.5), 5.0);
        assert!((g.norm() - 0.5).abs() < 1e-12);
    }
}
