//! Dataset sample types. Rasters are stored at their on-disk quantization
//! (8-bit RGB and labels, 16-bit depth) so memory and PNG round trips are
//! exact; float views are derived on demand.

use super::balance::BalanceReport;
use crate::simworld::TownId;
use crate::types::NavCommand;
use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

/// Per-frame scalar record, one JSON line per frame on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame: usize,
    pub timestamp: f64,
    /// Expert steering command, normalized [-1, 1]. The imitation target.
    pub steer_gt: f64,
    /// Expert target speed, m/s. The imitation target before normalization.
    pub speed_gt: f64,
    /// Steering actually applied to the vehicle (expert + injected noise).
    pub steer_executed: f64,
    pub noise_flag: bool,
    pub command: NavCommand,
    /// Measured ego speed at capture time, m/s.
    pub measured_speed: f64,
    /// Ego pose (x, y, heading) at capture time.
    pub pose: (f64, f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// (height, width, 3), 8-bit.
    pub rgb: Array3<u8>,
    /// (height, width), 16-bit, value/65535 is depth in far-plane units.
    pub depth: Array2<u16>,
    /// (height, width), class ids.
    pub semantic: Array2<u8>,
    pub record: FrameRecord,
}

impl Sample {
    pub fn rgb_f64(&self) -> Array3<f64> {
        self.rgb.mapv(|v| v as f64 / 255.0)
    }

    pub fn depth_f64(&self) -> Array2<f64> {
        self.depth.mapv(|v| v as f64 / 65535.0)
    }

    pub fn quantize_rgb(rgb: &Array3<f64>) -> Array3<u8> {
        rgb.mapv(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
    }

    pub fn quantize_depth(depth: &Array2<f64>) -> Array2<u16> {
        depth.mapv(|v| (v.clamp(0.0, 1.0) * 65535.0).round() as u16)
    }

    /// Small valid sample for unit tests.
    pub fn test_fixture(height: usize, width: usize) -> Sample {
        Sample {
            rgb: Array3::zeros((height, width, 3)),
            depth: Array2::zeros((height, width)),
            semantic: Array2::zeros((height, width)),
            record: FrameRecord {
                frame: 0,
                timestamp: 0.0,
                steer_gt: 0.0,
                speed_gt: 6.0,
                steer_executed: 0.0,
                noise_flag: false,
                command: NavCommand::LaneFollow,
                measured_speed: 6.0,
                pose: (0.0, 0.0, 0.0),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMeta {
    pub town: TownId,
    pub weather: String,
    pub seed: u64,
    pub n_frames: usize,
    pub reached_goal: bool,
    /// Populated when the episode ended early (for example off-route).
    pub truncation: Option<String>,
    pub route_length: f64,
    pub n_vehicles: usize,
    pub n_pedestrians: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub town_id: TownId,
    pub balancing_report: Option<BalanceReport>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantization_round_trips_within_half_a_step() {
        let rgb = Array3::from_shape_fn((2, 2, 3), |(y, x, c)| {
            (y as f64 * 0.3 + x as f64 * 0.21 + c as f64 * 0.11).fract()
        });
        let q = Sample::quantize_rgb(&rgb);
        let back = q.mapv(|v| v as f64 / 255.0);
        for (a, b) in rgb.iter().zip(back.iter()) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
        }
    }

    #[test]
    fn record_serializes_round_trip() {
        let s = Sample::test_fixture(2, 2);
        let json = serde_json::to_string(&s.record).unwrap();
        let back: FrameRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(s.record, back);
    }
}
