use std::path::PathBuf;

use thiserror::Error;

use crate::dataset::DatasetError;
use crate::dtw::DtwError;
use crate::geograph::GraphError;
use crate::ingest::IngestError;
use crate::repro::ReproError;
use crate::synth::SynthError;
use crate::zoning::ZoningError;

/// Any failure of a pipeline stage.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Repro(#[from] ReproError),
    #[error(transparent)]
    Dtw(#[from] DtwError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Zoning(#[from] ZoningError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Ingest(IngestError::NotFound(_)) => "input_not_found",
            Error::Dataset(_) => "dataset",
            Error::Ingest(_) => "ingest",
            Error::Repro(_) => "rt",
            Error::Dtw(_) => "distances",
            Error::Graph(_) => "graph",
            Error::Zoning(_) => "zoning",
            Error::Synth(_) => "synth",
            Error::Config(_) => "config",
            Error::Write { .. } => "write",
        }
    }

    /// `{"error": kind, "message": text}` on one line.
    pub fn to_json(&self) -> String {
        serde_json::json!({"error": self.kind(), "message": self.to_string()}).to_string()
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
