use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Network dimensions shared by both extractors, the invertible stack and
/// the aggregation heads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetConfig {
    /// Width of the no-reference fusion feature. Full-reference features and
    /// each invertible half are `feature_dim / 2` wide.
    pub feature_dim: usize,
    /// Output channels of each stride-2 convolution stage.
    pub conv_channels: Vec<usize>,
    pub inn_blocks: usize,
    pub inn_subnet_width: usize,
    /// Bound of the scaled-tanh clamp on coupling log-scales.
    pub inn_clamp: f64,
    pub gru_hidden: usize,
    /// Starting bias of every patch-quality FC, on the 0–100 DMOS scale.
    pub quality_bias_init: f64,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            feature_dim: 128,
            conv_channels: vec![32, 64, 64, 128, 128],
            inn_blocks: 3,
            inn_subnet_width: 128,
            inn_clamp: 2.0,
            gru_hidden: 64,
            quality_bias_init: 50.0,
        }
    }
}

impl NetConfig {
    /// Narrow body for desk-scale experiments; same topology as the default.
    pub fn compact() -> Self {
        NetConfig {
            feature_dim: 32,
            conv_channels: vec![8, 16, 16, 32, 32],
            inn_blocks: 3,
            inn_subnet_width: 32,
            inn_clamp: 2.0,
            gru_hidden: 16,
            quality_bias_init: 50.0,
        }
    }

    pub fn half_dim(&self) -> usize {
        self.feature_dim / 2
    }

    pub fn validate(&self) -> Result<()> {
        if self.feature_dim == 0 || self.feature_dim % 2 != 0 {
            return Err(Error::Config(format!(
                "feature_dim must be positive and even, got {}",
                self.feature_dim
            )));
        }
        if self.inn_blocks == 0 {
            return Err(Error::Config("inn_blocks must be at least 1".into()));
        }
        if self.conv_channels.is_empty() || self.conv_channels.contains(&0) {
            return Err(Error::Config(format!(
                "conv_channels must be non-empty and positive, got {:?}",
                self.conv_channels
            )));
        }
        if self.inn_subnet_width == 0 || self.gru_hidden == 0 {
            return Err(Error::Config("inn_subnet_width and gru_hidden must be positive".into()));
        }
        if !(self.inn_clamp > 0.0 && self.inn_clamp.is_finite()) {
            return Err(Error::Config(format!("inn_clamp must be positive, got {}", self.inn_clamp)));
        }
        if !self.quality_bias_init.is_finite() {
            return Err(Error::Config("quality_bias_init must be finite".into()));
        }
        Ok(())
    }
}
