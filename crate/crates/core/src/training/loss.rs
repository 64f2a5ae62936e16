//! The three supervised losses and their analytic gradients. The steering
//! loss upweights sharp-steering samples; the scene loss is pixel-wise
//! cross-entropy normalized by batch, pixel count and class count.

use ndarray::{Array1, Array3, Array4};
use serde::{Deserialize, Serialize};

use super::TrainError;

/// Probabilities are floored here before the log.
pub const PROB_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda1: 10.0,
            lambda2: 1.0,
            lambda3: 2.0,
            alpha: 5.0,
            beta: 1.0,
            gamma: 2.0,
        }
    }
}

fn steer_weight(gt: f64, w: &LossWeights) -> f64 {
    (1.0 + w.alpha * gt.abs().powf(w.beta)).powf(w.gamma)
}

/// Mean over the batch of (1 + α|gt|^β)^γ (pred − gt)².
pub fn steering_loss(pred: &Array1<f64>, gt: &Array1<f64>, w: &LossWeights) -> Result<f64, TrainError> {
    if pred.is_empty() {
        return Err(TrainError::EmptyBatch("steering_loss"));
    }
    assert_eq!(pred.len(), gt.len());
    let n = pred.len() as f64;
    let mut sum = 0.0;
    for (p, g) in pred.iter().zip(gt.iter()) {
        sum += steer_weight(*g, w) * (p - g) * (p - g);
    }
    Ok(sum / n)
}

pub fn steering_loss_grad(pred: &Array1<f64>, gt: &Array1<f64>, w: &LossWeights) -> Array1<f64> {
    let n = pred.len() as f64;
    Array1::from_shape_fn(pred.len(), |i| {
        2.0 * steer_weight(gt[i], w) * (pred[i] - gt[i]) / n
    })
}

/// Plain mean squared error on normalized speeds.
pub fn speed_loss(pred: &Array1<f64>, gt: &Array1<f64>) -> Result<f64, TrainError> {
    if pred.is_empty() {
        return Err(TrainError::EmptyBatch("speed_loss"));
    }
    assert_eq!(pred.len(), gt.len());
    let n = pred.len() as f64;
    Ok(pred
        .iter()
        .zip(gt.iter())
        .map(|(p, g)| (p - g) * (p - g))
        .sum::<f64>()
        / n)
}

pub fn speed_loss_grad(pred: &Array1<f64>, gt: &Array1<f64>) -> Array1<f64> {
    let n = pred.len() as f64;
    Array1::from_shape_fn(pred.len(), |i| 2.0 * (pred[i] - gt[i]) / n)
}

/// −(1/L)(1/Np)(1/Nc) ΣΣΣ gt·log(prob), with the class-count factor kept.
pub fn scene_loss(probs: &Array4<f64>, labels: &Array3<u8>) -> Result<f64, TrainError> {
    let (l, nc, h, w) = probs.dim();
    if l == 0 {
        return Err(TrainError::EmptyBatch("scene_loss"));
    }
    assert_eq!(labels.dim(), (l, h, w), "label raster shape");
    let norm = (l * h * w * nc) as f64;
    let mut sum = 0.0;
    for i in 0..l {
        for y in 0..h {
            for x in 0..w {
                let k = labels[[i, y, x]] as usize;
                debug_assert!(k < nc, "label {k} out of range");
                sum -= probs[[i, k, y, x]].max(PROB_FLOOR).ln();
            }
        }
    }
    Ok(sum / norm)
}

/// Gradient with respect to the probabilities (not the logits).
pub fn scene_loss_grad(probs: &Array4<f64>, labels: &Array3<u8>) -> Array4<f64> {
    let (l, nc, h, w) = probs.dim();
    let norm = (l * h * w * nc) as f64;
    let mut d = Array4::<f64>::zeros(probs.dim());
    for i in 0..l {
        for y in 0..h {
            for x in 0..w {
                let k = labels[[i, y, x]] as usize;
                let p = probs[[i, k, y, x]];
                if p > PROB_FLOOR {
                    d[[i, k, y, x]] = -1.0 / (norm * p);
                }
            }
        }
    }
    d
}

pub fn total_loss(steer_l: f64, speed_l: f64, scene_l: f64, w: &LossWeights) -> f64 {
    w.lambda1 * steer_l + w.lambda2 * speed_l + w.lambda3 * scene_l
}
