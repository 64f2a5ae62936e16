//! Driving benchmarks: task protocols, episode rollout, success and
//! trajectory metrics, aggregate reports, ablation arms, and plots.

pub mod ablation;
pub mod episode;
pub mod metrics;
pub mod plot;
pub mod report;
pub mod spec;

pub use ablation::make_ablation;
pub use episode::{
    run_episode, DrivingAgent, EpisodeResult, EpisodeTag, ExpertAgent, FailureReason, ModelAgent,
    StepContext, TrajectoryPoint, BENCH_DT,
};
pub use metrics::{episode_rmse, resample_positions, success_rate, trajectory_rmse};
pub use plot::{render_lines, save_lines, Series};
pub use report::{run_benchmark, BenchmarkReport, TaskReport};
pub use spec::{
    allowed_time, generate_routes, testing_weathers, training_weathers, BenchStyle, BenchmarkSpec,
    RouteProfile, Task, TIMEOUT_SPEED_KMH,
};

use crate::model::ModelError;
use crate::simworld::SimError;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("no successful episodes to compare")]
    NoSuccessfulEpisodes,
    #[error("unknown weather preset: {0}")]
    UnknownWeather(String),
    #[error("route generation failed: {0}")]
    RouteGeneration(String),
    #[error("invalid benchmark spec: {0}")]
    InvalidSpec(String),
    #[error("agent requires an observation but none was rendered")]
    MissingObservation,
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Image(#[from] image::ImageError),
}
