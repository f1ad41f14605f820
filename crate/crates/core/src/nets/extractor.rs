use candle_core::{DType, Tensor};
use rand::Rng;

use crate::dataset::PATCH_SIZE;
use crate::error::{Error, Result};
use crate::tensor::{Conv3x3, Init, Linear, NamedVar, DEVICE};

/// Convolutional patch encoder: stride-2 3×3 stages with ReLU, global
/// average pooling, then one or more linear heads whose outputs are
/// concatenated.
#[derive(Debug, Clone)]
pub struct Extractor {
    pub stages: Vec<Conv3x3>,
    pub heads: Vec<Linear>,
}

impl Extractor {
    pub fn new(channels: &[usize], head_widths: &[usize], rng: &mut impl Rng, dtype: DType) -> Result<Self> {
        let mut stages = Vec::with_capacity(channels.len());
        let mut inputs = 3;
        for &c in channels {
            stages.push(Conv3x3::new(inputs, c, 2, rng, dtype)?);
            inputs = c;
        }
        let heads = head_widths
            .iter()
            .map(|&w| Linear::new(inputs, w, Init::LINEAR, rng, dtype))
            .collect::<Result<_>>()?;
        Ok(Extractor { stages, heads })
    }

    pub fn output_dim(&self) -> usize {
        self.heads.iter().map(Linear::outputs).sum()
    }

    /// `(n, 64, 64, 3)` patches to `(n, output_dim)` features.
    pub fn forward(&self, patches: &Tensor) -> Result<Tensor> {
        check_patch_batch(patches)?;
        let mut h = patches.clone();
        for stage in &self.stages {
            h = stage.forward(&h)?.relu()?;
        }
        let pooled = h.mean((1, 2))?;
        let outs = self
            .heads
            .iter()
            .map(|head| head.forward(&pooled))
            .collect::<Result<Vec<_>>>()?;
        if outs.len() == 1 {
            Ok(outs.into_iter().next().unwrap())
        } else {
            Ok(Tensor::cat(&outs, 1)?)
        }
    }

    pub fn named_vars(&self, prefix: &str) -> Vec<NamedVar> {
        let mut out = Vec::new();
        for (i, s) in self.stages.iter().enumerate() {
            out.extend(s.named_vars(&format!("{prefix}.conv{i}")));
        }
        for (i, h) in self.heads.iter().enumerate() {
            out.extend(h.named_vars(&format!("{prefix}.head{i}")));
        }
        out
    }
}

pub fn check_patch_batch(patches: &Tensor) -> Result<()> {
    match patches.dims() {
        [_, h, w, 3] if *h == PATCH_SIZE && *w == PATCH_SIZE => Ok(()),
        other => Err(Error::Shape(format!(
            "expected (n, {PATCH_SIZE}, {PATCH_SIZE}, 3) patches, got {other:?}"
        ))),
    }
}

/// Patches given as NHWC floats in `[0, 1]`.
pub fn patch_tensor(data: Vec<f32>, dtype: DType) -> Result<Tensor> {
    let per = PATCH_SIZE * PATCH_SIZE * 3;
    if data.len() % per != 0 {
        return Err(Error::Shape(format!("{} floats is not a whole number of patches", data.len())));
    }
    let n = data.len() / per;
    Ok(Tensor::from_vec(data, (n, PATCH_SIZE, PATCH_SIZE, 3), &DEVICE)?.to_dtype(dtype)?)
}
