use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: dimension mismatch on `{operand}`: expected {expected}, found {found}")]
    Dimension {
        op: &'static str,
        operand: &'static str,
        expected: String,
        found: String,
    },

    #[error("{op}: index {index} out of range for size {size}")]
    Index {
        op: &'static str,
        index: usize,
        size: usize,
    },

    #[error("{0}: empty input")]
    EmptyInput(&'static str),

    #[error("{op}: expected a scalar, found shape {shape:?}")]
    NotScalar { op: &'static str, shape: Vec<usize> },

    #[error("invalid tensor: {0}")]
    InvalidTensor(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("loss is not deterministic: {first} then {second} for identical parameters")]
    NondeterministicLoss { first: f64, second: f64 },

    #[error("training diverged at epoch {epoch}, batch {batch}: loss = {loss}")]
    Divergence { epoch: usize, batch: usize, loss: f64 },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("gold tag(s) not in tagset: {0:?}")]
    UnknownTags(Vec<String>),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unsupported checkpoint format version {found} (supported: {supported})")]
    CheckpointVersion { found: u32, supported: u32 },

    #[error("checkpoint parameter `{name}`: shape mismatch, manifest has {found:?}, model expects {expected:?}")]
    CheckpointShape {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("checkpoint blob size mismatch at parameter `{name}`: {message}")]
    CheckpointSize { name: String, message: String },

    #[error("checkpoint parameter `{name}` contains a non-finite value")]
    CheckpointNonFinite { name: String },

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error("pretrained embeddings have dimension {found}, model expects {expected}")]
    PretrainedDimension { expected: usize, found: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dim(
        op: &'static str,
        operand: &'static str,
        expected: impl std::fmt::Debug,
        found: impl std::fmt::Debug,
    ) -> Self {
        Error::Dimension {
            op,
            operand,
            expected: format!("{expected:?}"),
            found: format!("{found:?}"),
        }
    }
}
