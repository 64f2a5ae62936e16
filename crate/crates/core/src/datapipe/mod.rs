//! Dataset pipeline: episode recording with steering-noise injection,
//! noise-frame elimination, lane-follow balancing, preprocessing into model
//! inputs, and training-time augmentation.

pub mod augment;
pub mod balance;
pub mod noise;
pub mod preprocess;
pub mod record;
pub mod sample;
pub mod storage;

use crate::simworld::SimError;
use thiserror::Error;

pub use augment::{augment_rgb, AugmentConfig};
pub use balance::{balance, balance_multiplicities, BalanceConfig, BalanceItem, BalanceReport};
pub use noise::NoiseSchedule;
pub use preprocess::{preprocess_planes, preprocess_sample, preprocess_semantic};
pub use record::{record_episode, CollectOutcome, EpisodeSettings};
pub use sample::{Dataset, EpisodeMeta, FrameRecord, Sample};
pub use storage::{
    load_episode_samples, load_sample, read_manifest, read_meta, read_records, write_manifest,
    DatasetManifest, EpisodeEntry, EpisodeWriter,
};

#[derive(Debug, Error)]
pub enum DataError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("image codec error: {0}")]
    Image(#[from] image::ImageError),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("raster shape mismatch: {context}")]
    ShapeMismatch { context: String },
    #[error("dataset is empty{0}")]
    EmptyDataset(&'static str),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("missing artifact: {0}")]
    MissingArtifact(String),
}

/// Remove every noise-flagged sample, preserving order.
pub fn strip_noise(dataset: Dataset) -> Dataset {
    let samples = dataset
        .samples
        .into_iter()
        .filter(|s| !s.record.noise_flag)
        .collect();
    Dataset {
        samples,
        ..dataset
    }
}
