//! Crate-wide error type.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An operation that needs at least one set mask pixel got an empty mask.
    #[error("empty object mask: {0}")]
    EmptyMask(String),

    #[error("instance '{instance_id}' appears in {frames_found} usable frame(s); need at least 2")]
    InsufficientFrames {
        instance_id: String,
        frames_found: usize,
    },

    #[error("manifest: {0}")]
    Manifest(String),

    #[error("empty dataset: manifest has no entries")]
    EmptyDataset,

    #[error("numerical divergence at step {step}: loss = {loss}")]
    NumericalDivergence { step: usize, loss: f64 },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    ImageCodec {
        path: PathBuf,
        source: image::ImageError,
    },

    /// A failure inside a multi-stage pipeline, labelled with the stage name.
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// Attaches a stage label to errors bubbling out of pipeline steps.
pub trait StageExt<T> {
    fn at_stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn at_stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| Error::Stage {
            stage,
            source: Box::new(e),
        })
    }
}
