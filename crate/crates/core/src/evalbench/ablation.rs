//! Variant configurations for the ablation study.

use crate::model::{ModelConfig, Variant};
use crate::training::LossWeights;

/// Specialize a base configuration for one ablation arm. MSFSU is the
/// full model; MSF drops the decoder and zeroes its loss term; SU keeps
/// the decoder but feeds the policy RGB only.
pub fn make_ablation(
    variant: Variant,
    base_model: &ModelConfig,
    base_weights: &LossWeights,
) -> (ModelConfig, LossWeights) {
    let mut model = base_model.clone();
    let mut weights = base_weights.clone();
    model.variant = variant;
    if variant == Variant::Msf {
        weights.lambda3 = 0.0;
    }
    (model, weights)
}
