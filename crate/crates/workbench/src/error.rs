use std::path::PathBuf;

use commonground::agreement::AgreementError;
use commonground::corpus::CorpusError;
use commonground::evaluation::EvalError;
use commonground::model::ModelError;
use commonground::scenario::ScenarioError;
use commonground::selfplay::SelfplayError;
use commonground::synth::SynthError;
use commonground::tagger::TaggerError;
use serde::Serialize;
use thiserror::Error;

use crate::render::RenderError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}:{line}: {reason}")]
    Config { path: PathBuf, line: usize, reason: String },
    #[error("import: {0}")]
    Import(String),
    #[error("checkpoint {path}: {reason}")]
    Checkpoint { path: PathBuf, reason: String },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Agreement(#[from] AgreementError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tagger(#[from] TaggerError),
    #[error(transparent)]
    Selfplay(#[from] SelfplayError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Render(#[from] RenderError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Machine-readable form printed on stderr by the CLI.
#[derive(Debug, Serialize)]
pub struct ErrorReport {
    pub error: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Error {
        Error::Io { path: path.into(), source }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Json { .. } => "schema",
            Error::Csv { .. } => "csv",
            Error::Config { .. } => "config",
            Error::Import(_) => "import",
            Error::Checkpoint { .. } => "checkpoint",
            Error::Usage(_) => "usage",
            Error::Corpus(_) => "integrity",
            Error::Scenario(_) => "scenario",
            Error::Agreement(_) => "agreement",
            Error::Model(ModelError::Divergence { .. }) => "divergence",
            Error::Model(_) => "model",
            Error::Tagger(TaggerError::Divergence { .. }) => "divergence",
            Error::Tagger(_) => "tagger",
            Error::Selfplay(_) => "selfplay",
            Error::Eval(_) => "evaluation",
            Error::Synth(_) => "synth",
            Error::Render(_) => "render",
        }
    }

    /// Offending record id, when the error names one.
    pub fn offending_id(&self) -> Option<String> {
        match self {
            Error::Corpus(e) => match e {
                CorpusError::DuplicateId { id, .. }
                | CorpusError::Dangling { id, .. }
                | CorpusError::Scenario { id, .. }
                | CorpusError::Dialogue { id, .. }
                | CorpusError::Markable { id, .. }
                | CorpusError::TooFewJudgements { id, .. }
                | CorpusError::LinkToGeneric { id, .. } => Some(id.clone()),
                CorpusError::Overlap { first, .. } => Some(first.clone()),
                CorpusError::Judgement { markable, .. } => Some(markable.clone()),
                CorpusError::CyclicLink(id) => Some(id.clone()),
                CorpusError::TooSmallToSplit(_) => None,
            },
            _ => None,
        }
    }

    pub fn report(&self) -> ErrorReport {
        let path = match self {
            Error::Io { path, .. }
            | Error::Json { path, .. }
            | Error::Csv { path, .. }
            | Error::Config { path, .. }
            | Error::Checkpoint { path, .. } => Some(path.clone()),
            _ => None,
        };
        ErrorReport { error: self.kind(), message: self.to_string(), path, id: self.offending_id() }
    }
}
