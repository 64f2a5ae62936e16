//! Weather presets. Weather only affects rendering: a color tint, glossy
//! puddle patches on the road and per-pixel texture noise.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatherParams {
    pub name: String,
    /// RGB multiplier applied to base colors.
    pub tint: [f64; 3],
    /// Strength of puddle-like bright patches on the road, in [0, 1].
    pub ground_gloss: f64,
    /// Per-pixel noise amplitude knob, in [0, 1].
    pub texture_noise_sigma: f64,
}

/// Names used while collecting training data.
pub const TRAINING_WEATHERS: [&str; 4] = [
    "clear_afternoon",
    "wet_afternoon",
    "hard_rain_afternoon",
    "clear_sunset",
];

/// Names reserved for testing.
pub const TESTING_WEATHERS: [&str; 3] = ["cloudy_wet_afternoon", "soft_rain_sunset", "wet_sunset"];

impl WeatherParams {
    pub fn by_name(name: &str) -> Option<WeatherParams> {
        let (tint, gloss, noise) = match name {
            "clear_afternoon" => ([1.0, 1.0, 1.0], 0.0, 0.05),
            "wet_afternoon" => ([0.85, 0.90, 0.95], 0.5, 0.15),
            "hard_rain_afternoon" => ([0.70, 0.75, 0.85], 0.8, 0.50),
            "clear_sunset" => ([1.00, 0.85, 0.70], 0.0, 0.05),
            "cloudy_wet_afternoon" => ([0.80, 0.85, 0.90], 0.6, 0.20),
            "soft_rain_sunset" => ([0.90, 0.80, 0.75], 0.4, 0.30),
            "wet_sunset" => ([0.95, 0.82, 0.72], 0.55, 0.15),
            _ => return None,
        };
        Some(WeatherParams {
            name: name.to_string(),
            tint,
            ground_gloss: gloss,
            texture_noise_sigma: noise,
        })
    }

    pub fn clear_afternoon() -> WeatherParams {
        WeatherParams::by_name("clear_afternoon").unwrap()
    }
}
