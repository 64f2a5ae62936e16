//! Training-time photometric augmentation of the RGB channels. Labels,
//! depth and semantic targets are never touched.

use ndarray::{Array2, ArrayViewMut3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    /// Probability of each augmentation firing, drawn independently.
    pub probability: f64,
    pub noise_sigma: f64,
    /// Maximum fraction of the image area a dropout rectangle may cover.
    pub dropout_max_area: f64,
    pub contrast_range: (f64, f64),
    pub blur_sigma_range: (f64, f64),
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            probability: 0.1,
            noise_sigma: 0.02,
            dropout_max_area: 0.10,
            contrast_range: (0.8, 1.2),
            blur_sigma_range: (0.5, 1.5),
        }
    }
}

/// One standard normal via Box-Muller.
fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random::<f64>().max(1e-12);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (2.5 * sigma).ceil() as i64;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    for v in &mut k {
        *v /= sum;
    }
    k
}

/// In-place augmentation of the first three channels of a (C, H, W)
/// tensor. Each transform fires independently with the configured
/// probability; all randomness comes from `rng`.
pub fn augment_rgb(mut input: ArrayViewMut3<f64>, config: &AugmentConfig, rng: &mut ChaCha8Rng) {
    let (_, h, w) = input.dim();
    // Draw the four gates first so the firing pattern depends only on the
    // leading rng state, then parameters per fired transform.
    let fire_noise = rng.random::<f64>() < config.probability;
    let fire_dropout = rng.random::<f64>() < config.probability;
    let fire_contrast = rng.random::<f64>() < config.probability;
    let fire_blur = rng.random::<f64>() < config.probability;

    if fire_noise {
        for ch in 0..3 {
            for y in 0..h {
                for x in 0..w {
                    input[(ch, y, x)] += config.noise_sigma * normal(rng);
                }
            }
        }
    }

    if fire_dropout {
        let area = rng.random_range(0.2 * config.dropout_max_area..=config.dropout_max_area);
        let aspect = rng.random_range(0.5..2.0);
        let rw = ((area * aspect).sqrt() * w as f64).round().max(1.0) as usize;
        let rh = ((area / aspect).sqrt() * h as f64).round().max(1.0) as usize;
        let rw = rw.min(w);
        let rh = rh.min(h);
        let x0 = rng.random_range(0..=w - rw);
        let y0 = rng.random_range(0..=h - rh);
        for ch in 0..3 {
            for y in y0..y0 + rh {
                for x in x0..x0 + rw {
                    input[(ch, y, x)] = 0.0;
                }
            }
        }
    }

    if fire_contrast {
        let (lo, hi) = config.contrast_range;
        let gain = rng.random_range(lo..=hi);
        for ch in 0..3 {
            for y in 0..h {
                for x in 0..w {
                    input[(ch, y, x)] = 0.5 + gain * (input[(ch, y, x)] - 0.5);
                }
            }
        }
    }

    if fire_blur {
        let (lo, hi) = config.blur_sigma_range;
        let sigma = rng.random_range(lo..=hi);
        let kernel = gaussian_kernel(sigma);
        let radius = (kernel.len() / 2) as i64;
        for ch in 0..3 {
            // Horizontal then vertical pass with edge clamping.
            let mut tmp = Array2::zeros((h, w));
            for y in 0..h {
                for x in 0..w {
                    let mut acc = 0.0;
                    for (k, kv) in kernel.iter().enumerate() {
                        let sx = (x as i64 + k as i64 - radius).clamp(0, w as i64 - 1) as usize;
                        acc += kv * input[(ch, y, sx)];
                    }
                    tmp[(y, x)] = acc;
                }
            }
            for y in 0..h {
                for x in 0..w {
                    let mut acc = 0.0;
                    for (k, kv) in kernel.iter().enumerate() {
                        let sy = (y as i64 + k as i64 - radius).clamp(0, h as i64 - 1) as usize;
                        acc += kv * tmp[(sy, x)];
                    }
                    input[(ch, y, x)] = acc;
                }
            }
        }
    }

    if fire_noise || fire_dropout || fire_contrast || fire_blur {
        for ch in 0..3 {
            for y in 0..h {
                for x in 0..w {
                    input[(ch, y, x)] = input[(ch, y, x)].clamp(0.0, 1.0);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;
    use rand::SeedableRng;

    fn test_input() -> Array3<f64> {
        Array3::from_shape_fn((4, 24, 24), |(c, y, x)| {
            (0.2 + 0.13 * c as f64 + 0.017 * y as f64 + 0.011 * x as f64).fract()
        })
    }

    fn no_op_seed(config: &AugmentConfig) -> u64 {
        (0..)
            .find(|&s| {
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                (0..4).all(|_| rng.random::<f64>() >= config.probability)
            })
            .unwrap()
    }

    #[test]
    fn no_op_when_no_gate_fires() {
        let config = AugmentConfig::default();
        let seed = no_op_seed(&config);
        let mut input = test_input();
        let original = input.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        augment_rgb(input.view_mut(), &config, &mut rng);
        assert_eq!(input, original);
    }

    #[test]
    fn output_stays_in_range_and_depth_untouched() {
        let config = AugmentConfig::default();
        for seed in 0..300 {
            let mut input = test_input();
            let depth_before = input.slice(ndarray::s![3, .., ..]).to_owned();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            augment_rgb(input.view_mut(), &config, &mut rng);
            for v in input.iter() {
                assert!((0.0..=1.0).contains(v), "seed {seed}: value {v}");
            }
            assert_eq!(input.slice(ndarray::s![3, .., ..]), depth_before);
        }
    }

    /// Monte Carlo check of the independent p = 0.1 gates: over 10,000
    /// seeds each transform fires 1000 +- 100 times (3-sigma binomial).
    #[test]
    fn gates_fire_at_the_configured_rate() {
        let config = AugmentConfig::default();
        let mut fired = [0usize; 4];
        for seed in 0..10_000u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for f in fired.iter_mut() {
                if rng.random::<f64>() < config.probability {
                    *f += 1;
                }
            }
        }
        for (i, f) in fired.iter().enumerate() {
            assert!(
                (900..=1100).contains(f),
                "gate {i} fired {f} times out of 10000"
            );
        }
    }

    #[test]
    fn deterministic_in_seed() {
        let config = AugmentConfig::default();
        let mut a = test_input();
        let mut b = test_input();
        let mut r1 = ChaCha8Rng::seed_from_u64(12345);
        let mut r2 = ChaCha8Rng::seed_from_u64(12345);
        augment_rgb(a.view_mut(), &config, &mut r1);
        augment_rgb(b.view_mut(), &config, &mut r2);
        assert_eq!(a, b);
    }

    #[test]
    fn dropout_zeroes_a_bounded_rectangle() {
        let config = AugmentConfig {
            probability: 1.0,
            noise_sigma: 0.0,
            contrast_range: (1.0, 1.0),
            blur_sigma_range: (0.5, 0.5),
            ..AugmentConfig::default()
        };
        // With noise sigma 0 and unit contrast, only dropout and blur act;
        // count exact zeros before blur by using a high-floor image.
        let mut input = Array3::from_elem((3, 30, 30), 0.9);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        augment_rgb(input.view_mut(), &config, &mut rng);
        let zeros = input
            .slice(ndarray::s![0, .., ..])
            .iter()
            .filter(|&&v| v < 0.45)
            .count();
        assert!(zeros > 0, "dropout never hit");
        assert!(
            (zeros as f64) < 0.2 * 30.0 * 30.0,
            "dropout area too large: {zeros}"
        );
    }
}
