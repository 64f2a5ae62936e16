//! Low-level actuation: PID speed tracking and steering denormalization.

use serde::{Deserialize, Serialize};

/// Full-scale steering in degrees; steer_norm 1.0 maps to this angle.
pub const STEER_DENORM_DEG: f64 = 70.0;

pub fn denormalize_steer(steer_norm: f64) -> f64 {
    steer_norm.clamp(-1.0, 1.0) * STEER_DENORM_DEG
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PidConfig {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Anti-windup bound on the raw error integral, m/s*s.
    pub integral_limit: f64,
}

impl Default for PidConfig {
    fn default() -> Self {
        Self {
            kp: 0.5,
            ki: 0.15,
            kd: 0.05,
            integral_limit: 2.0,
        }
    }
}

/// Speed controller state. One instance per controlled vehicle.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedPid {
    pub config: PidConfig,
    integral: f64,
    prev_error: Option<f64>,
}

impl SpeedPid {
    pub fn new(config: PidConfig) -> Self {
        Self {
            config,
            integral: 0.0,
            prev_error: None,
        }
    }

    pub fn reset(&mut self) {
        self.integral = 0.0;
        self.prev_error = None;
    }

    /// One controller tick. Returns (throttle, brake), each in [0, 1] and
    /// never both positive.
    pub fn update(&mut self, target_speed: f64, measured_speed: f64, dt: f64) -> (f64, f64) {
        assert!(dt > 0.0, "dt must be positive");
        let e = target_speed - measured_speed;
        self.integral = (self.integral + e * dt)
            .clamp(-self.config.integral_limit, self.config.integral_limit);
        // No derivative kick on the first sample after a reset.
        let de = match self.prev_error {
            Some(prev) => (e - prev) / dt,
            None => 0.0,
        };
        self.prev_error = Some(e);
        let u = self.config.kp * e + self.config.ki * self.integral + self.config.kd * de;
        if u >= 0.0 {
            (u.min(1.0), 0.0)
        } else {
            (0.0, (-u).min(1.0))
        }
    }
}
