use std::path::PathBuf;

use thiserror::Error;

use crate::corpus::Dimension;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unknown class {class:?} in dimension {dimension}")]
    UnknownClass { dimension: Dimension, class: String },
    #[error("unknown dimension {0:?}")]
    UnknownDimension(String),
    #[error("duplicate report id {0:?}")]
    DuplicateId(String),
    #[error("invalid taxonomy: {0}")]
    InvalidTaxonomy(String),
    #[error("infeasible corpus spec: {0}")]
    InfeasibleSpec(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("taxonomy mismatch: {0}")]
    TaxonomyMismatch(String),
    #[error("not enough reports ({reports}) for {folds} folds")]
    TooFewReports { reports: usize, folds: usize },
    #[error("report {0:?} missing from fold assignment")]
    MissingAssignment(String),
    #[error("no positive labels")]
    NoPositives,
    #[error("at least {required} values required, got {actual}")]
    TooFewValues { required: usize, actual: usize },
    #[error("training diverged at epoch {epoch} (loss {loss})")]
    NonFiniteLoss { epoch: usize, loss: f64 },
    #[error("index {index} out of range (len {len})")]
    OutOfRange { index: usize, len: usize },
    #[error("missing embedding for report {0:?}")]
    MissingEmbedding(String),
    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }
}
