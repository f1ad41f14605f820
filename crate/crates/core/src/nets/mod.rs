//! Feature extractors and the invertible split.
//!
//! Patches enter as NHWC `(n, 64, 64, 3)` tensors with pixels scaled to
//! `[0, 1]`. The full-reference extractor is applied siamese-style, one pass
//! per input, and emits `feature_dim / 2` features so they are commensurate
//! with the invertible halves. The no-reference extractor emits
//! `feature_dim` features.

mod config;
mod extractor;
mod inn;

pub use config::NetConfig;
pub use extractor::{check_patch_batch, patch_tensor, Extractor};
pub use inn::{CouplingBlock, InvertibleStack};

use candle_core::Tensor;

use crate::error::Result;

/// `(F_R, F_D)` from shared weights, each input in its own pass.
pub fn fr_extract(fr: &Extractor, reference: &Tensor, distorted: &Tensor) -> Result<(Tensor, Tensor)> {
    Ok((fr.forward(reference)?, fr.forward(distorted)?))
}

pub fn nr_extract(nr: &Extractor, distorted: &Tensor) -> Result<Tensor> {
    nr.forward(distorted)
}
