use std::path::PathBuf;

use thiserror::Error;

use crate::topology::NodeId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed arguments to an operation (dimension mismatch, node out of range, ...).
    #[error("invalid input: {0}")]
    Input(String),

    /// A structured document failed validation.
    #[error("schema error at {location}: {message}")]
    Schema { location: String, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    /// A caller broke a documented precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// An estimate left the finite region, or crossed the divergence threshold.
    #[error("divergence at node {node}, iteration {iteration}")]
    Divergence { node: NodeId, iteration: usize },

    /// Raised by pure update steps that have no node/iteration context.
    #[error("update produced a non-finite value")]
    NonFinite,

    #[error("theory unavailable: {0}")]
    Theory(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn schema(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            location: location.into(),
            message: message.into(),
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
