use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },

    #[error("empty graph")]
    EmptyGraph,

    #[error("conflicting label for {0}")]
    ConflictingLabel(String),

    #[error("unknown class token {token:?} for account {account}")]
    UnknownClass { account: String, token: String },

    #[error("unknown account {0}")]
    UnknownAccount(String),

    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u16, expected: u16 },

    #[error("checksum mismatch: file is truncated or corrupt")]
    Checksum,

    #[error("malformed file: {0}")]
    Format(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("training diverged at epoch {epoch}, batch {batch}: loss is {loss}")]
    Divergence { epoch: usize, batch: usize, loss: f64 },

    #[error("split error: {0}")]
    Split(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short stable tag for machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::EmptyGraph => "empty_graph",
            Error::ConflictingLabel(_) => "conflicting_label",
            Error::UnknownClass { .. } => "unknown_class",
            Error::UnknownAccount(_) => "unknown_account",
            Error::Version { .. } => "version",
            Error::Checksum => "checksum",
            Error::Format(_) => "format",
            Error::Config(_) => "config",
            Error::Schema(_) => "schema",
            Error::Shape(_) => "shape",
            Error::Invalid(_) => "invalid",
            Error::Divergence { .. } => "divergence",
            Error::Split(_) => "split",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
