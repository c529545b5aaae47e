//! Baseline grounding models: a shared entity encoder, a GRU over the
//! serialized dialogue, one attention module shared by all heads, and the
//! target-selection (TSEL), reference-resolution (REF) and next-token (DIAL)
//! decoders.

mod example;
mod network;
mod train;
mod vocab;

use core::fmt;
use core::str::FromStr;

use alloc::string::String;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use example::{build_example, build_examples, ModelExample, RefQuery};
pub use network::{GroundingModel, Head, IncrementalState, LossBreakdown, Prediction};
pub use train::{example_gradient, train, EpochRecord, GradientBackend, Sequential, TrainOutcome};
pub use vocab::{Vocab, EOS, SELECTION, THEM, UNK, YOU};

use crate::neural::{AdamConfig, NeuralError};
use crate::scenario::ScenarioError;

/// Which decoders are trained jointly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "TSEL")]
    Tsel,
    #[serde(rename = "REF")]
    Ref,
    #[serde(rename = "TSEL-REF")]
    TselRef,
    #[serde(rename = "TSEL-DIAL")]
    TselDial,
    #[serde(rename = "TSEL-REF-DIAL")]
    TselRefDial,
}

impl Variant {
    pub const ALL: [Variant; 5] = [Variant::Tsel, Variant::Ref, Variant::TselRef, Variant::TselDial, Variant::TselRefDial];

    pub fn has_tsel(self) -> bool {
        !matches!(self, Variant::Ref)
    }

    pub fn has_ref(self) -> bool {
        matches!(self, Variant::Ref | Variant::TselRef | Variant::TselRefDial)
    }

    pub fn has_dial(self) -> bool {
        matches!(self, Variant::TselDial | Variant::TselRefDial)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Tsel => "TSEL",
            Variant::Ref => "REF",
            Variant::TselRef => "TSEL-REF",
            Variant::TselDial => "TSEL-DIAL",
            Variant::TselRefDial => "TSEL-REF-DIAL",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| ModelError::UnknownVariant(s.into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub tsel: f64,
    pub reference: f64,
    pub dial: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub variant: Variant,
    pub token_dim: usize,
    pub hidden_dim: usize,
    pub attr_dim: usize,
    pub rel_dim: usize,
    pub attention_dim: usize,
    pub dropout: f64,
    pub loss_weights: LossWeights,
    pub optimizer: AdamConfig,
    /// Global gradient-norm clip.
    pub clip: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            variant: Variant::TselRefDial,
            token_dim: 256,
            hidden_dim: 256,
            attr_dim: 128,
            rel_dim: 128,
            attention_dim: 256,
            dropout: 0.5,
            loss_weights: LossWeights { tsel: 1.0, reference: 1.0, dial: 1.0 },
            optimizer: AdamConfig::default(),
            clip: 0.5,
            epochs: 30,
            batch_size: 16,
            patience: 4,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let dims = [self.token_dim, self.hidden_dim, self.attr_dim, self.rel_dim, self.attention_dim, self.batch_size];
        if dims.contains(&0) || !(0.0..1.0).contains(&self.dropout) || self.epochs == 0 {
            return Err(ModelError::InvalidConfig);
        }
        Ok(())
    }

    pub fn entity_dim(&self) -> usize {
        self.attr_dim + self.rel_dim
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid model configuration")]
    InvalidConfig,
    #[error("unknown model variant {0}")]
    UnknownVariant(String),
    #[error("expected 7 entities, got {0}")]
    WrongEntityCount(usize),
    #[error("dialogue {0} lacks a selection for the player")]
    MissingSelection(String),
    #[error("markable {0} lies outside the encoded token stream")]
    MarkableOutOfStream(String),
    #[error("the {0} head is not part of this model")]
    HeadInactive(&'static str),
    #[error("training diverged at epoch {epoch}, batch {batch}: loss {loss}")]
    Divergence { epoch: usize, batch: usize, loss: f64 },
    #[error("example {0} has an empty token stream")]
    EmptyExample(String),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
}
