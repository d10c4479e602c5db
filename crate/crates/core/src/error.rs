use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid tree: node {node}: {reason}")]
    InvalidTree { node: usize, reason: String },

    #[error("incompatible matrix: expected {expected_vocab}x{expected_k}, found {found_vocab}x{found_k}")]
    IncompatibleMatrix {
        expected_vocab: usize,
        expected_k: usize,
        found_vocab: usize,
        found_k: usize,
    },

    #[error("format error in field `{field}`: {detail}")]
    Format { field: &'static str, detail: String },

    #[error("training error: {0}")]
    Training(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn format(field: &'static str, detail: impl Into<String>) -> Self {
        Error::Format {
            field,
            detail: detail.into(),
        }
    }

    pub(crate) fn tree(node: usize, reason: impl Into<String>) -> Self {
        Error::InvalidTree {
            node,
            reason: reason.into(),
        }
    }
}
