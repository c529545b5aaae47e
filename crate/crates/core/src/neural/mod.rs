//! Dense arrays, a fixed set of differentiable primitives with hand-written
//! backward passes, a linear-chain CRF, Adam, and finite-difference checks.

mod adam;
mod array;
mod crf;
mod gradcheck;
mod gru;
mod layers;
pub mod ops;
mod params;

pub use adam::{clip_grad_norm, Adam, AdamConfig};
pub use array::Array;
pub use crf::{crf_log_partition, crf_marginals, crf_nll, crf_path_score, crf_viterbi, crf_viterbi_constrained, CrfGradients};
pub use gradcheck::{gradient_check, GradCheckConfig, GradCheckReport};
pub use gru::{GruCell, GruSequence, GruStepCache};
pub use layers::{dropout_mask, Embedding, Linear};
pub use params::{Gradients, ParamId, ParamStore};

use alloc::string::String;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NeuralError {
    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    Shape { expected: alloc::vec::Vec<usize>, actual: alloc::vec::Vec<usize> },
    #[error("data length {len} does not match shape {shape:?}")]
    DataLength { shape: alloc::vec::Vec<usize>, len: usize },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("non-finite gradient for parameter {0}")]
    NonFiniteGradient(String),
    #[error("CRF needs at least one step and two tags (got T={steps}, K={tags})")]
    CrfSize { steps: usize, tags: usize },
    #[error("unknown parameter {0}")]
    UnknownParam(String),
}
