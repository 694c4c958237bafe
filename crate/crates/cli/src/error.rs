//! Error type shared by the dataset, generator, training, and CLI layers.

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Bad command-line usage or an unknown preset; mapped to exit code 2.
    #[error("usage: {0}")]
    Usage(String),
    /// A configuration value that cannot work (bad ranges, incompatible
    /// model settings, overlapping splits).
    #[error("invalid config: {0}")]
    Config(String),
    /// Malformed dataset content: parse failures, frame-count mismatches,
    /// short episodes.
    #[error("data error: {0}")]
    Data(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// Anything raised by the model/autodiff layer.
    #[error("model error: {0}")]
    Model(#[from] slipnet_core::Error),
    /// Checkpoint file problems: bad magic, digest mismatch, missing
    /// parameters.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    /// Training aborted mid-run (e.g. a non-finite loss) with where it died.
    #[error("training aborted: {0}")]
    Train(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Wraps an IO error with the path it concerned.
pub fn io_at(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
    let path = path.into();
    move |source| Error::Io { path, source }
}
