//! Steering-noise injection schedule: a one-second perturbation at the end
//! of every five-second period, with a trapezoidal ramp-hold-ramp profile
//! and a per-event random peak and sign.

use crate::geom::{hash_unit, splitmix64};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSchedule {
    /// Window repetition period, seconds.
    pub period: f64,
    /// Active window length, seconds. The window occupies the last
    /// `duration` seconds of each period.
    pub duration: f64,
    /// Shift applied to the episode clock, seconds; moves the window
    /// pattern relative to the episode start.
    pub phase: f64,
    /// Peak magnitude range in normalized steer, sampled per event.
    pub magnitude_range: (f64, f64),
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        Self {
            period: 5.0,
            duration: 1.0,
            phase: 0.0,
            magnitude_range: (0.15, 0.30),
        }
    }
}

impl NoiseSchedule {
    /// Whether `t` falls inside a noise window. The window sits at the end
    /// of each period: active iff (t + phase) mod period >= period - duration.
    pub fn window_active(&self, t: f64) -> bool {
        let m = (t + self.phase).rem_euclid(self.period);
        m >= self.period - self.duration - 1e-9
    }

    fn event_index(&self, t: f64) -> u64 {
        ((t + self.phase) / self.period).floor() as i64 as u64
    }

    /// Signed peak for the event containing `t`, drawn from hashes of
    /// (seed, event index) so it is stable within the window.
    fn event_peak(&self, t: f64, seed: u64) -> f64 {
        let ev = self.event_index(t);
        let h = splitmix64(seed ^ ev.wrapping_mul(0xD6E8_FEB8_6659_FD93));
        let (lo, hi) = self.magnitude_range;
        let peak = lo + (hi - lo) * hash_unit(h);
        let sign = if splitmix64(h) & 1 == 0 { 1.0 } else { -1.0 };
        sign * peak
    }

    /// Perturbation value at time `t` and whether the frame counts as
    /// noise-flagged. Zero-magnitude schedules never flag anything.
    pub fn sample(&self, t: f64, seed: u64) -> (f64, bool) {
        if !self.window_active(t) {
            return (0.0, false);
        }
        let peak = self.event_peak(t, seed);
        if peak == 0.0 {
            return (0.0, false);
        }
        let m = (t + self.phase).rem_euclid(self.period);
        let u = (m - (self.period - self.duration)) / self.duration;
        // Ramp up over the first quarter, hold, ramp down over the last.
        let envelope = (u / 0.25).min(1.0).min((1.0 - u) / 0.25).max(0.0);
        (peak * envelope, true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Enumeration oracle: 10 s at 10 FPS, period 5 s, duration 1 s. The
    /// windows cover frames 40-49 and 90-99, so 20 of 100 frames flag.
    #[test]
    fn hundred_frame_enumeration() {
        let sched = NoiseSchedule::default();
        let flagged: Vec<usize> = (0..100)
            .filter(|&k| sched.sample(k as f64 * 0.1, 7).1)
            .collect();
        assert_eq!(flagged.len(), 20);
        let expected: Vec<usize> = (40..50).chain(90..100).collect();
        assert_eq!(flagged, expected);
    }

    /// A phase shift moves the same 10-frame-per-period pattern; phase 4 s
    /// puts windows at frames 0-9 and 50-59 of the local clock.
    #[test]
    fn phase_shifts_the_pattern() {
        let sched = NoiseSchedule {
            phase: 4.0,
            ..NoiseSchedule::default()
        };
        let flagged: Vec<usize> = (0..100)
            .filter(|&k| sched.sample(k as f64 * 0.1, 7).1)
            .collect();
        let expected: Vec<usize> = (0..10).chain(50..60).collect();
        assert_eq!(flagged, expected);
    }

    #[test]
    fn flagged_frames_are_consecutive_per_period() {
        let sched = NoiseSchedule::default();
        // Full periods only: 20 s -> 4 windows of exactly 10 frames each.
        let flags: Vec<bool> = (0..200).map(|k| sched.sample(k as f64 * 0.1, 3).1).collect();
        let mut runs = Vec::new();
        let mut run = 0;
        for &f in &flags {
            if f {
                run += 1;
            } else if run > 0 {
                runs.push(run);
                run = 0;
            }
        }
        if run > 0 {
            runs.push(run);
        }
        assert_eq!(runs, vec![10, 10, 10, 10]);
    }

    #[test]
    fn zero_magnitude_never_flags() {
        let sched = NoiseSchedule {
            magnitude_range: (0.0, 0.0),
            ..NoiseSchedule::default()
        };
        for k in 0..200 {
            let (v, f) = sched.sample(k as f64 * 0.1, 9);
            assert_eq!(v, 0.0);
            assert!(!f);
        }
    }

    #[test]
    fn envelope_ramps_and_holds_within_bounds() {
        let sched = NoiseSchedule::default();
        let seed = 11;
        let values: Vec<f64> = (40..50).map(|k| sched.sample(k as f64 * 0.1, seed).0).collect();
        let peak = values.iter().cloned().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(peak >= 0.15 && peak <= 0.30, "peak {peak}");
        // Same sign throughout one event.
        let sign = values[5].signum();
        for v in &values[1..] {
            assert!(v.signum() == sign || *v == 0.0);
        }
        // Starts at zero, reaches the hold level, decays at the end.
        assert_eq!(values[0], 0.0);
        assert!((values[3].abs() - peak).abs() < 1e-12);
        assert!(values[9].abs() < peak);
    }

    #[test]
    fn deterministic_and_event_varying() {
        let sched = NoiseSchedule::default();
        let a = sched.sample(4.35, 21);
        let b = sched.sample(4.35, 21);
        assert_eq!(a, b);
        // Different events draw different peaks with high probability.
        let p1 = sched.sample(4.5, 21).0.abs();
        let p2 = sched.sample(9.5, 21).0.abs();
        assert_ne!(p1, p2);
    }
}
