use thiserror::Error;

use crate::cluster::ClusterError;
use crate::fixation::FixationError;
use crate::ingest::IngestError;
use crate::render::RenderError;
use crate::sequence::{GeometryError, SequenceError};
use crate::stats::StatsError;

/// Any error raised by the library, tagged by the module that raised it.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Fixation(#[from] FixationError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Sequence(#[from] SequenceError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Render(#[from] RenderError),
}

impl Error {
    /// Stable machine-readable code, e.g. `"OutOfBounds"`.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Ingest(e) => e.code(),
            Error::Fixation(e) => e.code(),
            Error::Cluster(e) => e.code(),
            Error::Sequence(e) => e.code(),
            Error::Geometry(_) => "GeometryError",
            Error::Stats(e) => e.code(),
            Error::Render(e) => e.code(),
        }
    }

    pub fn module(&self) -> &'static str {
        match self {
            Error::Ingest(_) => "ingest",
            Error::Fixation(_) => "fixation",
            Error::Cluster(_) => "cluster",
            Error::Sequence(_) | Error::Geometry(_) => "sequence",
            Error::Stats(_) => "stats",
            Error::Render(_) => "render",
        }
    }
}
