use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("format error: {0}")]
    Format(String),

    #[error("stream truncated at frame {frame}")]
    Truncated { frame: u64 },

    #[error("{what} out of range: {detail}")]
    Range { what: &'static str, detail: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("numeric divergence in {regime}: {detail}")]
    Divergence { regime: String, detail: String },

    #[error("no activity bump: firing-rate field is all zero")]
    NoBump,

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("file not found: {0}")]
    MissingFile(PathBuf),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn range(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Range {
            what,
            detail: detail.into(),
        }
    }
}
