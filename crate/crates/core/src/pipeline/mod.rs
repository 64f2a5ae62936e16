//! Artifact-producing pipeline stages and the run configuration that
//! drives them. The CLI is a thin wrapper over this module.

pub mod config;
pub mod stages;

pub use config::{CollectConfig, Paths, RunConfig};
pub use stages::{
    ablate, artifact_tag, bench, checkpoint_path, collect, load_prepared, prepare, read_prepared,
    replay, train, AblateSummary, AgentKind, BenchSummary, CollectSummary, PreparedIndex,
    PrepareSummary, ReplaySummary, TrainSummary,
};

use crate::datapipe::DataError;
use crate::evalbench::BenchError;
use crate::model::ModelError;
use crate::simworld::SimError;
use crate::training::TrainError;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("missing artifact: {0}")]
    MissingArtifact(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("image codec error: {0}")]
    Image(#[from] image::ImageError),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}
