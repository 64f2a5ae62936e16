//! Core library of the msfsu driving stack: a deterministic synthetic
//! driving world, the data pipeline, the multi-modal fusion network with a
//! scene-understanding head, training, and closed-loop benchmarks.

pub mod control;
pub mod datapipe;
pub mod evalbench;
pub mod geom;
pub mod model;
pub mod pipeline;
pub mod simworld;
pub mod training;
pub mod types;

pub use types::{ControlCommand, NavCommand, SemanticClass, N_SEMANTIC_CLASSES};
