//! Network configuration: variant, encoder stage layout, decoder filters,
//! branch head sizes. Two presets: a desk-scale config that trains on a CPU
//! and a full-scale config with the reference widths.

use serde::{Deserialize, Serialize};

use super::ModelError;

/// Total downsampling of the encoder; the decoder strides multiply back to it.
pub const ENCODER_STRIDE: usize = 32;

pub const DECODER_STRIDES: [usize; 5] = [4, 2, 2, 2, 1];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Full model: RGBD input, segmentation decoder, driving branches.
    Msfsu,
    /// Fusion only: RGBD input, no segmentation decoder.
    Msf,
    /// Segmentation only: RGB input (depth channel removed), decoder kept.
    Su,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Msfsu => "MSFSU",
            Variant::Msf => "MSF",
            Variant::Su => "SU",
        }
    }

    pub fn parse(s: &str) -> Result<Variant, ModelError> {
        match s.to_ascii_lowercase().as_str() {
            "msfsu" => Ok(Variant::Msfsu),
            "msf" => Ok(Variant::Msf),
            "su" => Ok(Variant::Su),
            other => Err(ModelError::Config(format!("unknown variant '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub variant: Variant,
    /// Square input edge, must be a multiple of 32.
    pub input_size: usize,
    pub stem_width: usize,
    /// Output width of each residual stage.
    pub stage_widths: [usize; 4],
    /// Bottleneck blocks per stage.
    pub stage_blocks: [usize; 4],
    /// Transposed-convolution filter counts; the last equals n_classes.
    pub decoder_filters: [usize; 5],
    pub branch_hidden: [usize; 2],
    pub dropout: f64,
    pub n_classes: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::desk(Variant::Msfsu)
    }
}

impl ModelConfig {
    pub fn desk(variant: Variant) -> Self {
        ModelConfig {
            variant,
            input_size: 96,
            stem_width: 12,
            stage_widths: [12, 24, 48, 96],
            stage_blocks: [1, 1, 1, 1],
            decoder_filters: [32, 16, 16, 8, 5],
            branch_hidden: [64, 64],
            dropout: 0.5,
            n_classes: 5,
        }
    }

    pub fn full(variant: Variant) -> Self {
        ModelConfig {
            variant,
            input_size: 224,
            stem_width: 64,
            stage_widths: [256, 512, 1024, 2048],
            stage_blocks: [3, 4, 6, 3],
            decoder_filters: [512, 128, 64, 16, 5],
            branch_hidden: [256, 256],
            dropout: 0.5,
            n_classes: 5,
        }
    }

    /// Small enough for finite-difference checks of the whole network.
    pub fn micro(variant: Variant) -> Self {
        ModelConfig {
            variant,
            input_size: 32,
            stem_width: 4,
            stage_widths: [4, 4, 6, 8],
            stage_blocks: [1, 1, 1, 1],
            decoder_filters: [6, 6, 5, 5, 5],
            branch_hidden: [8, 8],
            dropout: 0.0,
            n_classes: 5,
        }
    }

    pub fn input_channels(&self) -> usize {
        match self.variant {
            Variant::Su => 3,
            _ => 4,
        }
    }

    pub fn has_decoder(&self) -> bool {
        self.variant != Variant::Msf
    }

    /// Spatial edge of the encoder output.
    pub fn feature_size(&self) -> usize {
        self.input_size / ENCODER_STRIDE
    }

    pub fn latent_len(&self) -> usize {
        self.stage_widths[3]
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.input_size == 0 || self.input_size % ENCODER_STRIDE != 0 {
            return Err(ModelError::Config(format!(
                "input_size {} must be a positive multiple of {ENCODER_STRIDE}",
                self.input_size
            )));
        }
        if self.decoder_filters[4] != self.n_classes {
            return Err(ModelError::Config(format!(
                "last decoder filter count {} must equal n_classes {}",
                self.decoder_filters[4], self.n_classes
            )));
        }
        let upsample: usize = DECODER_STRIDES.iter().product();
        if self.feature_size() * upsample != self.input_size {
            return Err(ModelError::Config(
                "decoder strides do not close back to the input size".into(),
            ));
        }
        if self.stage_widths.contains(&0) || self.stage_blocks.contains(&0) || self.stem_width == 0
        {
            return Err(ModelError::Config("zero-width encoder stage".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(ModelError::Config(format!(
                "dropout {} outside [0,1)",
                self.dropout
            )));
        }
        Ok(())
    }
}
