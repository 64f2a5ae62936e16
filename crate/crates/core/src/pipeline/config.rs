//! One TOML file drives every pipeline stage. Unset keys fall back to
//! desk-scale defaults, so a minimal config is an empty file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::control::PidConfig;
use crate::datapipe::{AugmentConfig, BalanceConfig, NoiseSchedule};
use crate::evalbench::BenchmarkSpec;
use crate::model::{ModelConfig, Variant};
use crate::simworld::{CameraConfig, SimParams, TownId};
use crate::training::{LossWeights, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    pub dataset_dir: PathBuf,
    pub checkpoint_dir: PathBuf,
    pub report_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            dataset_dir: "data".into(),
            checkpoint_dir: "checkpoints".into(),
            report_dir: "reports".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CollectConfig {
    pub episodes: usize,
    pub town: TownId,
    pub dt: f64,
    pub max_steps: usize,
    pub vehicles: usize,
    pub pedestrians: usize,
    /// Fraction of episodes held out for validation (at least one).
    pub val_fraction: f64,
    pub route_seed: u64,
}

impl Default for CollectConfig {
    fn default() -> Self {
        CollectConfig {
            episodes: 20,
            town: TownId::TrainTown,
            dt: 0.1,
            max_steps: 2000,
            vehicles: 0,
            pedestrians: 0,
            val_fraction: 0.2,
            route_seed: 99,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub paths: Paths,
    pub sim: SimParams,
    pub camera: CameraConfig,
    pub collect: CollectConfig,
    pub noise: NoiseSchedule,
    pub balance: BalanceConfig,
    pub augment: AugmentConfig,
    pub pid: PidConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub loss: LossWeights,
    pub bench: BenchmarkSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            paths: Paths::default(),
            sim: SimParams::default(),
            // Renders small; preprocessing crops the top half and resizes
            // to the model's square input.
            camera: CameraConfig::with_size(96, 72),
            collect: CollectConfig::default(),
            noise: NoiseSchedule::default(),
            balance: BalanceConfig::default(),
            augment: AugmentConfig::default(),
            pid: PidConfig::default(),
            model: ModelConfig::desk(Variant::Msfsu),
            train: TrainConfig::default(),
            loss: LossWeights::default(),
            bench: BenchmarkSpec::corl2017(TownId::TrainTown),
        }
    }
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<RunConfig, PipelineError> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| {
            PipelineError::Invalid(format!("{}: {e}", path.as_ref().display()))
        })?;
        let cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| PipelineError::Invalid(format!("{}: {e}", path.as_ref().display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), PipelineError> {
        let text = toml::to_string_pretty(self)
            .map_err(|e| PipelineError::Invalid(e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        self.model.validate()?;
        self.bench.validate()?;
        if self.collect.episodes < 2 {
            return Err(PipelineError::Invalid(
                "collect.episodes must be at least 2 for a train/val split".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.collect.val_fraction) {
            return Err(PipelineError::Invalid(format!(
                "collect.val_fraction {} outside [0, 1)",
                self.collect.val_fraction
            )));
        }
        if self.collect.dt <= 0.0 {
            return Err(PipelineError::Invalid("collect.dt must be positive".into()));
        }
        Ok(())
    }
}
