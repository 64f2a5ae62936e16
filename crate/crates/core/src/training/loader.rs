//! Batch assembly. A training set is a pool of unique samples plus an index
//! multiset (balancing duplicates indices, not rasters). Preprocessing and
//! augmentation run when a batch is built, so duplicated samples get fresh
//! augmentations every epoch.

use ndarray::{Array1, Array3, Array4};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::TrainError;
use crate::datapipe::{augment_rgb, preprocess_sample, AugmentConfig, Sample};
use crate::types::NavCommand;

#[derive(Debug, Clone)]
pub struct TrainData {
    pub samples: Vec<Sample>,
    /// Indices into `samples`, with repeats for oversampled frames.
    pub indices: Vec<usize>,
}

impl TrainData {
    /// Every sample once, no duplication.
    pub fn plain(samples: Vec<Sample>) -> Self {
        let indices = (0..samples.len()).collect();
        TrainData { samples, indices }
    }

    pub fn with_indices(samples: Vec<Sample>, indices: Vec<usize>) -> Self {
        assert!(indices.iter().all(|i| *i < samples.len()));
        TrainData { samples, indices }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct Batch {
    /// (batch, channels, size, size) in [0, 1].
    pub inputs: Array4<f64>,
    pub steer_gt: Array1<f64>,
    /// Normalized by v_max to [0, 1].
    pub speed_gt: Array1<f64>,
    /// (batch, size, size) class ids.
    pub labels: Array3<u8>,
    pub commands: Vec<NavCommand>,
}

/// Shuffled batch index lists for one epoch. A trailing single-sample batch
/// is dropped: batch statistics are undefined for one row.
pub fn epoch_batches(indices: &[usize], batch_size: usize, seed: u64, epoch: usize) -> Vec<Vec<usize>> {
    assert!(batch_size >= 2, "batch_size must be at least 2");
    let mut order: Vec<usize> = indices.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (epoch as u64).wrapping_mul(0x9e3779b97f4a7c15));
    order.shuffle(&mut rng);
    let mut out: Vec<Vec<usize>> = order.chunks(batch_size).map(|c| c.to_vec()).collect();
    if out.last().is_some_and(|b| b.len() < 2) {
        out.pop();
    }
    out
}

/// Build one model-ready batch from sample pool indices.
pub fn assemble_batch(
    samples: &[Sample],
    idxs: &[usize],
    size: usize,
    include_depth: bool,
    v_max: f64,
    augment: Option<(&AugmentConfig, &mut ChaCha8Rng)>,
) -> Result<Batch, TrainError> {
    if idxs.is_empty() {
        return Err(TrainError::EmptyBatch("assemble_batch"));
    }
    let b = idxs.len();
    let channels = if include_depth { 4 } else { 3 };
    let mut inputs = Array4::<f64>::zeros((b, channels, size, size));
    let mut labels = Array3::<u8>::zeros((b, size, size));
    let mut steer = Array1::<f64>::zeros(b);
    let mut speed = Array1::<f64>::zeros(b);
    let mut commands = Vec::with_capacity(b);
    let mut aug = augment;
    for (row, &i) in idxs.iter().enumerate() {
        let sample = &samples[i];
        let (mut input, target) = preprocess_sample(sample, size, include_depth)?;
        if let Some((config, rng)) = aug.as_mut() {
            augment_rgb(input.view_mut(), config, rng);
        }
        inputs.index_axis_mut(ndarray::Axis(0), row).assign(&input);
        labels.index_axis_mut(ndarray::Axis(0), row).assign(&target);
        steer[row] = sample.record.steer_gt;
        speed[row] = (sample.record.speed_gt / v_max).clamp(0.0, 1.0);
        commands.push(sample.record.command);
    }
    Ok(Batch {
        inputs,
        steer_gt: steer,
        speed_gt: speed,
        labels,
        commands,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datapipe::FrameRecord;
    use ndarray::{Array2, Array3 as A3};

    fn sample(tag: u8, steer: f64, speed: f64, command: NavCommand) -> Sample {
        Sample {
            rgb: A3::from_elem((16, 20, 3), tag),
            depth: Array2::from_elem((16, 20), tag as u16 * 100),
            semantic: Array2::from_elem((16, 20), tag % 5),
            record: FrameRecord {
                frame: tag as usize,
                timestamp: tag as f64 * 0.1,
                steer_gt: steer,
                speed_gt: speed,
                steer_executed: steer,
                noise_flag: false,
                command,
                measured_speed: speed,
                pose: (0.0, 0.0, 0.0),
            },
        }
    }

    fn pool() -> Vec<Sample> {
        vec![
            sample(1, 0.2, 3.0, NavCommand::LaneFollow),
            sample(2, -0.5, 5.0, NavCommand::TurnLeft),
            sample(3, 0.0, 10.0, NavCommand::Straight),
            sample(4, 0.9, 2.5, NavCommand::TurnRight),
        ]
    }

    #[test]
    fn epoch_batches_cover_all_indices_once() {
        let indices: Vec<usize> = (0..10).chain(std::iter::repeat_n(3, 4)).collect();
        let batches = epoch_batches(&indices, 4, 7, 0);
        let mut seen: Vec<usize> = batches.concat();
        seen.sort_unstable();
        let mut want = indices.clone();
        want.sort_unstable();
        assert_eq!(seen, want);
        assert!(batches.iter().all(|b| b.len() >= 2 && b.len() <= 4));
    }

    #[test]
    fn epoch_batches_reshuffle_between_epochs_but_not_between_runs() {
        let indices: Vec<usize> = (0..64).collect();
        let e0 = epoch_batches(&indices, 8, 42, 0);
        let e1 = epoch_batches(&indices, 8, 42, 1);
        assert_ne!(e0, e1);
        assert_eq!(e0, epoch_batches(&indices, 8, 42, 0));
    }

    #[test]
    fn trailing_singleton_batch_is_dropped() {
        let indices: Vec<usize> = (0..9).collect();
        let batches = epoch_batches(&indices, 4, 1, 0);
        let total: usize = batches.iter().map(|b| b.len()).sum();
        assert_eq!(total, 8);
    }

    #[test]
    fn batch_carries_normalized_targets_and_commands() {
        let samples = pool();
        let batch = assemble_batch(&samples, &[0, 1, 2, 3], 8, true, 10.0, None).unwrap();
        assert_eq!(batch.inputs.dim(), (4, 4, 8, 8));
        assert_eq!(batch.labels.dim(), (4, 8, 8));
        assert_eq!(batch.steer_gt.as_slice().unwrap(), &[0.2, -0.5, 0.0, 0.9]);
        assert_eq!(batch.speed_gt.as_slice().unwrap(), &[0.3, 0.5, 1.0, 0.25]);
        assert_eq!(
            batch.commands,
            vec![
                NavCommand::LaneFollow,
                NavCommand::TurnLeft,
                NavCommand::Straight,
                NavCommand::TurnRight
            ]
        );
        // Labels survive preprocessing as ids from the source raster.
        assert!(batch.labels.index_axis(ndarray::Axis(0), 0).iter().all(|v| *v == 1));
    }

    #[test]
    fn duplicated_indices_get_independent_augmentations() {
        let samples = pool();
        let config = AugmentConfig {
            probability: 1.0,
            ..AugmentConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let batch =
            assemble_batch(&samples, &[0, 0], 8, true, 10.0, Some((&config, &mut rng))).unwrap();
        let a = batch.inputs.index_axis(ndarray::Axis(0), 0);
        let b = batch.inputs.index_axis(ndarray::Axis(0), 1);
        assert_ne!(a, b, "same frame should differ after augmentation");
        // Depth channel is left alone by the photometric ops.
        assert_eq!(
            a.index_axis(ndarray::Axis(0), 3),
            b.index_axis(ndarray::Axis(0), 3)
        );
    }

    #[test]
    fn without_augmentation_duplicates_are_identical() {
        let samples = pool();
        let batch = assemble_batch(&samples, &[2, 2], 8, false, 10.0, None).unwrap();
        assert_eq!(batch.inputs.dim().1, 3);
        assert_eq!(
            batch.inputs.index_axis(ndarray::Axis(0), 0),
            batch.inputs.index_axis(ndarray::Axis(0), 1)
        );
    }

    #[test]
    fn empty_batch_is_an_error() {
        let samples = pool();
        assert!(matches!(
            assemble_batch(&samples, &[], 8, true, 10.0, None),
            Err(TrainError::EmptyBatch(_))
        ));
    }
}
