use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Parameter vector, tensor or batch does not fit the model it was handed to.
    #[error("incompatible shapes: {0}")]
    Incompatible(String),

    #[error("numeric overflow: {0}")]
    NumericOverflow(String),

    #[error("invalid argument: {0}")]
    Validation(String),

    /// No well-defined maximizer: the direction vector vanishes on the allowed support.
    #[error("degenerate direction: vector is zero on the top-{n} support")]
    DegenerateDirection { n: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("metric `{metric}` is not supported for this model")]
    UnsupportedMetric { metric: String },

    #[error("mode error: {0}")]
    Mode(String),

    /// Malformed binary input; `offset` is the byte where parsing failed.
    #[error("format error at byte offset {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("csv error at row {row}, column {column}: {message}")]
    Csv { row: usize, column: usize, message: String },

    #[error("checkpoint error in `{field}`: {message}")]
    Checkpoint { field: String, message: String },

    #[error("unsupported checkpoint format_version {0}")]
    UnsupportedVersion(u64),

    #[error("training diverged at epoch {epoch} (batch {batch}): loss {loss}")]
    Divergence { epoch: usize, batch: usize, loss: f64 },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn incompatible(msg: impl Into<String>) -> Self {
        Error::Incompatible(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
