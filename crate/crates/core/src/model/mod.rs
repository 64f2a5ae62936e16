//! The driving network: early-fusion RGBD residual encoder, semantic
//! decoder, pooled latent, and four command-switched policy branches, with
//! the MSF (no decoder) and SU (no depth) ablation variants.

pub mod checkpoint;
pub mod config;
pub mod net;
pub mod nn;
pub mod params;

use thiserror::Error;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta};
pub use config::{ModelConfig, Variant, DECODER_STRIDES, ENCODER_STRIDE};
pub use net::{EncodeOut, Model, MsfsuNet, NetOutput, OutputGrads, Tape};
pub use params::{ParamStore, StateStore};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model config error: {0}")]
    Config(String),
    #[error("input shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },
    #[error("this variant has no decoder")]
    NoDecoder,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}
