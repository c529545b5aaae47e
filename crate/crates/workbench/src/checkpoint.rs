//! Parameter checkpoints: a versioned JSON map name → shape → row-major
//! values, with a `<checkpoint>.meta.json` sidecar holding configuration,
//! vocabulary and training history.

use std::path::{Path, PathBuf};

use commonground::model::{EpochRecord, GroundingModel, ModelConfig, Vocab};
use commonground::neural::{Array, ParamStore};
use commonground::scenario::SizeRange;
use commonground::tagger::{Tagger, TaggerConfig, TaggerEpoch};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_json, write_json};

pub const FORMAT: &str = "commonground-parameters";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterFile {
    pub format: String,
    pub version: u32,
    pub parameters: Vec<ParameterEntry>,
}

impl ParameterFile {
    pub fn from_store(store: &ParamStore) -> ParameterFile {
        ParameterFile {
            format: FORMAT.into(),
            version: VERSION,
            parameters: store
                .iter()
                .map(|(_, name, a)| ParameterEntry { name: name.into(), shape: a.shape().to_vec(), values: a.data().to_vec() })
                .collect(),
        }
    }

    pub fn arrays(&self, path: &Path) -> Result<Vec<(String, Array)>> {
        if self.format != FORMAT || self.version != VERSION {
            return Err(checkpoint_err(path, format!("unsupported format {} v{}", self.format, self.version)));
        }
        self.parameters
            .iter()
            .map(|p| {
                Array::from_vec(&p.shape, p.values.clone())
                    .map(|a| (p.name.clone(), a))
                    .map_err(|e| checkpoint_err(path, format!("{}: {e}", p.name)))
            })
            .collect()
    }
}

fn checkpoint_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Checkpoint { path: path.into(), reason: reason.into() }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    with_suffix(path, ".meta.json")
}

/// Per-epoch metrics log written next to a checkpoint.
pub fn metrics_path(path: &Path) -> PathBuf {
    with_suffix(path, ".metrics.jsonl")
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub kind: String,
    pub config: ModelConfig,
    pub vocab: Vocab,
    /// Size range used to normalize entity attributes.
    pub sizes: SizeRange,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggerMeta {
    pub kind: String,
    pub config: TaggerConfig,
    pub vocab: Vocab,
    pub history: Vec<TaggerEpoch>,
    pub best_epoch: usize,
}

const GROUNDING: &str = "grounding-model";
const TAGGER: &str = "markable-tagger";

fn load_pair<M: DeserializeOwned>(path: &Path) -> Result<(Vec<(String, Array)>, M)> {
    let file: ParameterFile = read_json(path)?;
    let arrays = file.arrays(path)?;
    let meta = read_json(&sidecar_path(path))?;
    Ok((arrays, meta))
}

pub fn save_model(path: &Path, model: &GroundingModel, sizes: SizeRange, history: &[EpochRecord], best_epoch: usize) -> Result<()> {
    write_json(path, &ParameterFile::from_store(model.store()))?;
    let meta = ModelMeta {
        kind: GROUNDING.into(),
        config: model.config().clone(),
        vocab: model.vocab().clone(),
        sizes,
        history: history.to_vec(),
        best_epoch,
    };
    write_json(&sidecar_path(path), &meta)
}

pub fn load_model(path: &Path) -> Result<(GroundingModel, ModelMeta)> {
    let (arrays, meta): (_, ModelMeta) = load_pair(path)?;
    if meta.kind != GROUNDING {
        return Err(checkpoint_err(path, format!("expected a {GROUNDING}, found {}", meta.kind)));
    }
    let mut model = GroundingModel::new(meta.config.clone(), meta.vocab.clone())?;
    model
        .load_parameters(arrays.iter().map(|(n, a)| (n.as_str(), a)))
        .map_err(|e| checkpoint_err(path, e.to_string()))?;
    Ok((model, meta))
}

pub fn save_tagger(path: &Path, tagger: &Tagger, history: &[TaggerEpoch], best_epoch: usize) -> Result<()> {
    write_json(path, &ParameterFile::from_store(tagger.store()))?;
    let meta = TaggerMeta {
        kind: TAGGER.into(),
        config: tagger.config().clone(),
        vocab: tagger.vocab().clone(),
        history: history.to_vec(),
        best_epoch,
    };
    write_json(&sidecar_path(path), &meta)
}

pub fn load_tagger(path: &Path) -> Result<(Tagger, TaggerMeta)> {
    let (arrays, meta): (_, TaggerMeta) = load_pair(path)?;
    if meta.kind != TAGGER {
        return Err(checkpoint_err(path, format!("expected a {TAGGER}, found {}", meta.kind)));
    }
    let mut tagger = Tagger::new(meta.config.clone(), meta.vocab.clone())?;
    tagger
        .store_mut()
        .load(arrays.iter().map(|(n, a)| (n.as_str(), a)))
        .map_err(|e| checkpoint_err(path, e.to_string()))?;
    Ok((tagger, meta))
}
