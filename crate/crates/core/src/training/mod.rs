//! Supervised training: losses, optimizer, schedule, batching, loop.

pub mod gradcheck;
pub mod loader;
pub mod loss;
pub mod nadam;
pub mod schedule;
pub mod trainer;

pub use gradcheck::{central_fd, richardson_fd};
pub use loader::{assemble_batch, epoch_batches, Batch, TrainData};
pub use loss::{
    scene_loss, scene_loss_grad, speed_loss, speed_loss_grad, steering_loss, steering_loss_grad,
    total_loss, LossWeights, PROB_FLOOR,
};
pub use nadam::NAdam;
pub use schedule::{PlateauSchedule, ScheduleEvent};
pub use trainer::{
    eval_losses, train_model, train_model_with, EpochLosses, EpochRow, StopReason, TrainConfig,
    TrainReport,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("empty batch in {0}")]
    EmptyBatch(&'static str),
    #[error("invalid training setup: {0}")]
    Invalid(&'static str),
    #[error("training diverged at epoch {epoch} (loss {loss})")]
    Diverged { epoch: usize, loss: f64 },
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
    #[error(transparent)]
    Data(#[from] crate::datapipe::DataError),
}
