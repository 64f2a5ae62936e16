//! Lane-follow dataset balancing.
//!
//! Three stages over lane-follow samples, all other commands pass through
//! untouched: keep a random 20% of the small-steer frames, repeat
//! large-steer frames seven times, then repeat slow frames of that result
//! four times. Final multiplicities are therefore in {0, 1, 4, 7, 28}.

use super::DataError;
use crate::control::STEER_DENORM_DEG;
use crate::types::NavCommand;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BalanceConfig {
    /// Steer magnitudes below this many degrees count as small.
    pub small_steer_deg: f64,
    /// Fraction of small-steer samples kept (floor of count * fraction).
    pub keep_fraction: f64,
    /// Final multiplicity of large-steer samples.
    pub large_multiplicity: usize,
    /// Speeds below this many m/s count as slow.
    pub slow_speed_mps: f64,
    /// Extra factor applied to slow samples.
    pub slow_multiplicity: usize,
}

impl Default for BalanceConfig {
    fn default() -> Self {
        Self {
            small_steer_deg: 5.0,
            keep_fraction: 0.2,
            large_multiplicity: 7,
            slow_speed_mps: 1.0,
            slow_multiplicity: 4,
        }
    }
}

/// Counts after each balancing stage, over lane-follow samples only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub input_total: usize,
    pub lane_follow_input: usize,
    /// Small-steer survivors after the 20% subsampling.
    pub stage1: usize,
    /// Stage 1 plus large-steer samples at their multiplicity.
    pub stage2: usize,
    /// Stage 2 with the slow-sample factor applied.
    pub stage3: usize,
    /// Samples with other commands, passed through once each.
    pub passthrough: usize,
    pub final_total: usize,
}

impl BalanceReport {
    pub fn to_text(&self) -> String {
        format!(
            "balancing report\n\
             input_total,{}\n\
             lane_follow_input,{}\n\
             stage1_small_steer_kept,{}\n\
             stage2_with_large_steer_x7,{}\n\
             stage3_with_slow_x4,{}\n\
             passthrough_other_commands,{}\n\
             final_total,{}\n",
            self.input_total,
            self.lane_follow_input,
            self.stage1,
            self.stage2,
            self.stage3,
            self.passthrough,
            self.final_total
        )
    }
}

/// Anything balanceable: the label fields the stages inspect.
pub trait BalanceItem {
    fn command(&self) -> NavCommand;
    /// Normalized steer in [-1, 1].
    fn steer_gt(&self) -> f64;
    /// Speed label in m/s.
    fn speed_gt(&self) -> f64;
}

impl BalanceItem for super::sample::Sample {
    fn command(&self) -> NavCommand {
        self.record.command
    }
    fn steer_gt(&self) -> f64 {
        self.record.steer_gt
    }
    fn speed_gt(&self) -> f64 {
        self.record.speed_gt
    }
}

impl BalanceItem for super::sample::FrameRecord {
    fn command(&self) -> NavCommand {
        self.command
    }
    fn steer_gt(&self) -> f64 {
        self.steer_gt
    }
    fn speed_gt(&self) -> f64 {
        self.speed_gt
    }
}

/// Per-item output multiplicities plus the stage report. Deterministic in
/// `seed`. Items keep their input order; duplicates are adjacent.
pub fn balance_multiplicities<T: BalanceItem>(
    items: &[T],
    config: &BalanceConfig,
    seed: u64,
) -> Result<(Vec<usize>, BalanceReport), DataError> {
    if items.is_empty() {
        return Err(DataError::EmptyDataset(" (balance input)"));
    }
    let small_thresh = config.small_steer_deg / STEER_DENORM_DEG;

    let small_idx: Vec<usize> = items
        .iter()
        .enumerate()
        .filter(|(_, s)| {
            s.command() == NavCommand::LaneFollow && s.steer_gt().abs() < small_thresh
        })
        .map(|(i, _)| i)
        .collect();
    let keep_n = (config.keep_fraction * small_idx.len() as f64).floor() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shuffled = small_idx.clone();
    shuffled.shuffle(&mut rng);
    let mut kept = vec![false; items.len()];
    for &i in shuffled.iter().take(keep_n) {
        kept[i] = true;
    }

    let mut mult = vec![0usize; items.len()];
    let mut lane_follow_input = 0;
    let mut stage1 = 0;
    let mut stage2 = 0;
    let mut stage3 = 0;
    let mut passthrough = 0;
    for (i, s) in items.iter().enumerate() {
        if s.command() != NavCommand::LaneFollow {
            mult[i] = 1;
            passthrough += 1;
            continue;
        }
        lane_follow_input += 1;
        let small = s.steer_gt().abs() < small_thresh;
        let m12 = if small {
            if kept[i] {
                1
            } else {
                0
            }
        } else {
            config.large_multiplicity
        };
        let m = if s.speed_gt() < config.slow_speed_mps {
            m12 * config.slow_multiplicity
        } else {
            m12
        };
        mult[i] = m;
        stage1 += if small { m12 } else { 0 };
        stage2 += m12;
        stage3 += m;
    }
    let final_total = stage3 + passthrough;
    let report = BalanceReport {
        input_total: items.len(),
        lane_follow_input,
        stage1,
        stage2,
        stage3,
        passthrough,
        final_total,
    };
    Ok((mult, report))
}

/// Materialized balancing: clones items according to their multiplicity.
pub fn balance<T: BalanceItem + Clone>(
    items: &[T],
    config: &BalanceConfig,
    seed: u64,
) -> Result<(Vec<T>, BalanceReport), DataError> {
    let (mult, report) = balance_multiplicities(items, config, seed)?;
    let mut out = Vec::with_capacity(report.final_total);
    for (item, &m) in items.iter().zip(&mult) {
        for _ in 0..m {
            out.push(item.clone());
        }
    }
    debug_assert_eq!(out.len(), report.final_total);
    Ok((out, report))
}
