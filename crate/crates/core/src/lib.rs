//! Reference-resolution laboratory for partially-observable referring games.
//!
//! The crate is `no_std` (with `alloc`) and contains every algorithmic piece:
//! scenario generation, the annotated-corpus data model, agreement and
//! disagreement statistics, a small verified neural kernel, the baseline
//! grounding models, a BIO/CRF markable tagger, the selfplay game engine and
//! evaluation metrics. File formats, the dataset import adapter, rendering
//! and the CLI live in the `commonground-workbench` crate.

#![no_std]

extern crate alloc;

pub mod agreement;
pub mod corpus;
pub mod evaluation;
pub mod math;
pub mod model;
pub mod neural;
pub mod rng;
pub mod scenario;
pub mod selfplay;
pub mod synth;
pub mod tagger;

pub use corpus::{AnnotatedCorpus, Dialogue, Event, Markable, MarkableFlags, ReferentJudgement};
pub use scenario::{Entity, Player, Scenario, ScenarioConfig, View, ViewMask, VIEW_SIZE};
