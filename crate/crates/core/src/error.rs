use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// The network description does not chain, or a batch does not fit it.
    #[error("configuration error at layer {layer}: {msg}")]
    Config { layer: usize, msg: String },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    /// Well-formed input carrying values outside their domain (e.g. a label > 9).
    #[error("data error: {0}")]
    Data(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("unsupported checkpoint version {found} (expected {expected})")]
    UnsupportedVersion { found: u16, expected: u16 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("training diverged at global epoch {global_epoch}; last good checkpoint: {}", last_good.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "<none>".into()))]
    Divergence {
        global_epoch: usize,
        last_good: Option<PathBuf>,
    },

    #[error("I/O error on {path} at byte offset {offset}: {source}")]
    IoAt {
        path: PathBuf,
        offset: u64,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(layer: usize, msg: impl Into<String>) -> Self {
        Error::Config {
            layer,
            msg: msg.into(),
        }
    }
}
