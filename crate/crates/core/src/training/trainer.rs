//! The training loop: NAdam over weighted multi-task losses, plateau lr
//! decay, early stopping, best-validation snapshotting. Fully deterministic
//! for a fixed seed.

use ndarray::Array1;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loader::{assemble_batch, epoch_batches, TrainData};
use super::loss::{
    scene_loss, scene_loss_grad, speed_loss, speed_loss_grad, steering_loss, steering_loss_grad,
    total_loss, LossWeights,
};
use super::nadam::NAdam;
use super::schedule::{PlateauSchedule, ScheduleEvent};
use super::TrainError;
use crate::datapipe::AugmentConfig;
use crate::model::{Model, ModelConfig, OutputGrads};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub initial_lr: f64,
    pub lr_decay_factor: f64,
    /// Epochs without validation improvement before the lr is decayed.
    pub lr_patience: usize,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before training stops.
    pub early_stop_patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            initial_lr: 3e-4,
            lr_decay_factor: 0.5,
            lr_patience: 5,
            batch_size: 32,
            max_epochs: 100,
            early_stop_patience: 20,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxEpochs,
    EarlyStop,
    /// A caller-supplied target metric was reached.
    TargetReached,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StopReason::MaxEpochs => write!(f, "max_epochs"),
            StopReason::EarlyStop => write!(f, "early_stop"),
            StopReason::TargetReached => write!(f, "target_reached"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLosses {
    pub total: f64,
    pub steer: f64,
    pub speed: f64,
    pub scene: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRow {
    pub epoch: usize,
    pub lr: f64,
    pub train: EpochLosses,
    pub val: EpochLosses,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Validation losses of the untrained model; the improvement baseline.
    pub baseline: EpochLosses,
    pub epochs: Vec<EpochRow>,
    /// 0 means the untrained baseline was never beaten.
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stop_reason: StopReason,
}

impl TrainReport {
    pub fn lr_history(&self) -> Vec<f64> {
        self.epochs.iter().map(|r| r.lr).collect()
    }

    /// One row per epoch, no timestamps, stable float formatting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "epoch,lr,train_total,train_steer,train_speed,train_scene,\
             val_total,val_steer,val_speed,val_scene\n",
        );
        for r in &self.epochs {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                r.epoch,
                r.lr,
                r.train.total,
                r.train.steer,
                r.train.speed,
                r.train.scene,
                r.val.total,
                r.val.steer,
                r.val.speed,
                r.val.scene,
            ));
        }
        out
    }
}

/// Per-command-weighted losses of a full forward pass.
fn batch_losses(
    steer: &Array1<f64>,
    speed: &Array1<f64>,
    semantics: Option<&ndarray::Array4<f64>>,
    batch: &super::loader::Batch,
    weights: &LossWeights,
) -> Result<EpochLosses, TrainError> {
    let s = steering_loss(steer, &batch.steer_gt, weights)?;
    let v = speed_loss(speed, &batch.speed_gt)?;
    let c = match semantics {
        Some(probs) => scene_loss(probs, &batch.labels)?,
        None => 0.0,
    };
    Ok(EpochLosses {
        total: total_loss(s, v, c, weights),
        steer: s,
        speed: v,
        scene: c,
    })
}

/// Evaluation-mode losses over a whole dataset, batched.
pub fn eval_losses(
    model: &Model,
    data: &TrainData,
    batch_size: usize,
    v_max: f64,
    weights: &LossWeights,
) -> Result<EpochLosses, TrainError> {
    if data.is_empty() {
        return Err(TrainError::EmptyBatch("evaluation set"));
    }
    let size = model.net.config.input_size;
    let include_depth = model.net.config.input_channels() == 4;
    let (mut sums, mut n_seen) = ([0.0f64; 4], 0usize);
    for chunk in data.indices.chunks(batch_size) {
        let batch = assemble_batch(&data.samples, chunk, size, include_depth, v_max, None)?;
        let out = model.forward(&batch.inputs, &batch.commands)?;
        let l = batch_losses(&out.steer, &out.speed, out.semantics.as_ref(), &batch, weights)?;
        let b = chunk.len() as f64;
        sums[0] += l.total * b;
        sums[1] += l.steer * b;
        sums[2] += l.speed * b;
        sums[3] += l.scene * b;
        n_seen += chunk.len();
    }
    let n = n_seen as f64;
    Ok(EpochLosses {
        total: sums[0] / n,
        steer: sums[1] / n,
        speed: sums[2] / n,
        scene: sums[3] / n,
    })
}

/// Train a fresh model of `model_config` on `train`, validating on `val`.
/// Returns the model restored to its best-validation snapshot plus the
/// epoch-by-epoch report. Identical inputs give identical outputs.
pub fn train_model(
    train: &TrainData,
    val: &TrainData,
    model_config: ModelConfig,
    train_config: &TrainConfig,
    weights: &LossWeights,
    v_max: f64,
    augment: Option<&AugmentConfig>,
) -> Result<(Model, TrainReport), TrainError> {
    train_model_with(
        train,
        val,
        model_config,
        train_config,
        weights,
        v_max,
        augment,
        None,
    )
}

/// `train_model` plus an optional per-epoch target check. When the
/// callback returns true, training stops and the current model (not the
/// best-validation snapshot) is returned with `StopReason::TargetReached`.
#[allow(clippy::too_many_arguments)]
pub fn train_model_with(
    train: &TrainData,
    val: &TrainData,
    model_config: ModelConfig,
    train_config: &TrainConfig,
    weights: &LossWeights,
    v_max: f64,
    augment: Option<&AugmentConfig>,
    mut target: Option<&mut dyn FnMut(&Model, &EpochRow) -> bool>,
) -> Result<(Model, TrainReport), TrainError> {
    if train_config.batch_size < 2 {
        return Err(TrainError::Invalid("batch_size must be at least 2"));
    }
    if train.len() < 2 {
        return Err(TrainError::EmptyBatch("training set"));
    }
    let mut model = Model::new(model_config, train_config.seed)?;
    let size = model.net.config.input_size;
    let include_depth = model.net.config.input_channels() == 4;
    let mut opt = NAdam::new(model.param_count());

    let baseline = eval_losses(&model, val, train_config.batch_size, v_max, weights)?;
    let mut schedule = PlateauSchedule::new(
        train_config.initial_lr,
        train_config.lr_decay_factor,
        train_config.lr_patience,
        train_config.early_stop_patience,
        baseline.total,
    );
    let mut best = (model.params.values.clone(), model.states.values.clone());
    let mut best_epoch = 0usize;
    let mut best_val = baseline.total;

    let mut rows = Vec::new();
    let mut stop_reason = StopReason::MaxEpochs;
    let mut restore_best = true;
    for epoch in 1..=train_config.max_epochs {
        let lr = schedule.lr();
        let seed = train_config.seed;
        let e = epoch as u64;
        let mut aug_rng = ChaCha8Rng::seed_from_u64(seed ^ e.wrapping_mul(0xa076_1d64_78bd_642f));
        let mut drop_rng = ChaCha8Rng::seed_from_u64(seed ^ e.wrapping_mul(0xe703_7ed1_a0b4_28db));

        let (mut sums, mut n_seen) = ([0.0f64; 4], 0usize);
        for idxs in epoch_batches(&train.indices, train_config.batch_size, seed, epoch) {
            let aug = augment.map(|a| (a, &mut aug_rng));
            let batch = assemble_batch(&train.samples, &idxs, size, include_depth, v_max, aug)?;
            let (out, tape) = model.forward_train(&batch.inputs, &batch.commands, &mut drop_rng)?;
            let l = batch_losses(&out.steer, &out.speed, out.semantics.as_ref(), &batch, weights)?;
            if !l.total.is_finite() {
                return Err(TrainError::Diverged {
                    epoch,
                    loss: l.total,
                });
            }
            let d_steer = steering_loss_grad(&out.steer, &batch.steer_gt, weights)
                .mapv(|g| g * weights.lambda1);
            let d_speed =
                speed_loss_grad(&out.speed, &batch.speed_gt).mapv(|g| g * weights.lambda2);
            let d_sem_probs = out.semantics.as_ref().and_then(|probs| {
                (weights.lambda3 != 0.0)
                    .then(|| scene_loss_grad(probs, &batch.labels).mapv(|g| g * weights.lambda3))
            });
            model.params.zero_grads();
            model.backward(
                &tape,
                &OutputGrads {
                    d_sem_probs,
                    d_steer,
                    d_speed,
                },
            );
            opt.step(&mut model.params, lr);
            let b = idxs.len() as f64;
            sums[0] += l.total * b;
            sums[1] += l.steer * b;
            sums[2] += l.speed * b;
            sums[3] += l.scene * b;
            n_seen += idxs.len();
        }
        let n = n_seen as f64;
        let train_losses = EpochLosses {
            total: sums[0] / n,
            steer: sums[1] / n,
            speed: sums[2] / n,
            scene: sums[3] / n,
        };

        let val_losses = eval_losses(&model, val, train_config.batch_size, v_max, weights)?;
        if !val_losses.total.is_finite() {
            return Err(TrainError::Diverged {
                epoch,
                loss: val_losses.total,
            });
        }
        rows.push(EpochRow {
            epoch,
            lr,
            train: train_losses,
            val: val_losses,
        });

        if let Some(cb) = target.as_deref_mut() {
            if cb(&model, rows.last().unwrap()) {
                stop_reason = StopReason::TargetReached;
                restore_best = false;
                break;
            }
        }

        match schedule.observe(val_losses.total) {
            ScheduleEvent::Improved => {
                best = (model.params.values.clone(), model.states.values.clone());
                best_epoch = epoch;
                best_val = val_losses.total;
            }
            ScheduleEvent::Plateau { stop, .. } => {
                if stop {
                    stop_reason = StopReason::EarlyStop;
                    break;
                }
            }
        }
    }

    if restore_best {
        model.params.values = best.0;
        model.states.values = best.1;
    }
    Ok((
        model,
        TrainReport {
            baseline,
            epochs: rows,
            best_epoch,
            best_val_loss: best_val,
            stop_reason,
        },
    ))
}
