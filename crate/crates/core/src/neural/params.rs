use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{Array, NeuralError};
use crate::math;
use crate::rng::{self, Rng};

/// Handle into a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ParamId(pub usize);

/// Named parameters in registration order. Initialization draws from a
/// generator seeded once at construction, so identical registration
/// sequences give identical values.
#[derive(Debug, Clone)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Array>,
    index: BTreeMap<String, ParamId>,
    seed: u64,
    rng: Rng,
}

impl ParamStore {
    pub fn new(seed: u64) -> ParamStore {
        ParamStore { names: Vec::new(), values: Vec::new(), index: BTreeMap::new(), seed, rng: rng::seeded(seed) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn push(&mut self, name: &str, value: Array) -> ParamId {
        assert!(!self.index.contains_key(name), "duplicate parameter {name}");
        let id = ParamId(self.values.len());
        self.names.push(name.to_string());
        self.values.push(value);
        self.index.insert(name.to_string(), id);
        id
    }

    /// Matrix initialized uniformly in `±1/√fan_in`.
    pub fn add_matrix(&mut self, name: &str, rows: usize, cols: usize, fan_in: usize) -> ParamId {
        let a = 1.0 / math::sqrt(fan_in as f64);
        let data = (0..rows * cols).map(|_| self.rng.random_range(-a..a)).collect();
        let value = Array::from_vec(&[rows, cols], data).expect("positive dims");
        self.push(name, value)
    }

    /// Vector initialized uniformly in `±1/√fan_in`.
    pub fn add_vector(&mut self, name: &str, len: usize, fan_in: usize) -> ParamId {
        let a = 1.0 / math::sqrt(fan_in as f64);
        let data = (0..len).map(|_| self.rng.random_range(-a..a)).collect();
        self.push(name, Array::from_vec(&[len], data).expect("positive dims"))
    }

    pub fn add_zeros(&mut self, name: &str, shape: &[usize]) -> ParamId {
        self.push(name, Array::zeros(shape))
    }

    pub fn get(&self, id: ParamId) -> &Array {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Array {
        &mut self.values[id.0]
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(Array::len).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Array)> {
        self.names.iter().zip(&self.values).enumerate().map(|(i, (n, v))| (ParamId(i), n.as_str(), v))
    }

    /// Replaces values from `(name, array)` pairs; every parameter must be
    /// present with a matching shape.
    pub fn load<'a, I: IntoIterator<Item = (&'a str, &'a Array)>>(&mut self, entries: I) -> Result<(), NeuralError> {
        let mut seen = alloc::vec![false; self.values.len()];
        for (name, value) in entries {
            let id = self.id(name).ok_or_else(|| NeuralError::UnknownParam(name.to_string()))?;
            if self.values[id.0].shape() != value.shape() {
                return Err(NeuralError::Shape {
                    expected: self.values[id.0].shape().to_vec(),
                    actual: value.shape().to_vec(),
                });
            }
            self.values[id.0] = value.clone();
            seen[id.0] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(NeuralError::UnknownParam(self.names[missing].clone()));
        }
        Ok(())
    }

    pub fn gradients(&self) -> Gradients {
        Gradients { bufs: self.values.iter().map(|v| Array::zeros(v.shape())).collect() }
    }
}

/// Gradient buffers shaped like a [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    bufs: Vec<Array>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> &Array {
        &self.bufs[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Array {
        &mut self.bufs[id.0]
    }

    pub fn buf(&mut self, id: ParamId) -> &mut [f64] {
        self.bufs[id.0].data_mut()
    }

    pub fn zero(&mut self) {
        self.bufs.iter_mut().for_each(|b| b.fill(0.0));
    }

    pub fn add(&mut self, other: &Gradients) {
        for (a, b) in self.bufs.iter_mut().zip(&other.bufs) {
            a.add_scaled(b, 1.0);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for b in &mut self.bufs {
            b.data_mut().iter_mut().for_each(|x| *x *= s);
        }
    }

    pub fn norm(&self) -> f64 {
        math::sqrt(self.bufs.iter().flat_map(|b| b.data()).map(|x| x * x).sum())
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Array)> {
        self.bufs.iter().enumerate().map(|(i, b)| (ParamId(i), b))
    }
}
