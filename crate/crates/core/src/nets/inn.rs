//! Invertible split of the fusion feature into pseudo-reference and
//! pseudo-distortion halves, built from affine coupling blocks.
//!
//! A block keeps one half `c` and transforms the other `u`:
//! `u' = u * exp(s(c)) + t(c)`, with `s = clamp * tanh(raw / clamp)`.
//! Blocks alternate which half they transform. The output's first half is
//! the pseudo-reference feature, the second the pseudo-distortion feature.

use candle_core::{DType, Tensor};
use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{Init, Linear, NamedVar};

#[derive(Debug, Clone)]
pub struct CouplingBlock {
    pub hidden: Linear,
    pub out: Linear,
    /// Transforms the second half conditioned on the first when true.
    pub transform_second: bool,
    clamp: f64,
}

impl CouplingBlock {
    fn new(half: usize, width: usize, transform_second: bool, clamp: f64, zero_out: bool, rng: &mut impl Rng, dtype: DType) -> Result<Self> {
        let out_init = if zero_out { Init::Zeros } else { Init::LINEAR };
        Ok(CouplingBlock {
            hidden: Linear::new(half, width, Init::RELU, rng, dtype)?,
            out: Linear::new(width, 2 * half, out_init, rng, dtype)?,
            transform_second,
            clamp,
        })
    }

    /// `(log_scale, shift)` computed from the conditioning half.
    fn scale_shift(&self, cond: &Tensor) -> Result<(Tensor, Tensor)> {
        let half = cond.dim(1)?;
        let raw = self.out.forward(&self.hidden.forward(cond)?.relu()?)?;
        let s = (raw.narrow(1, 0, half)? / self.clamp)?.tanh()?.affine(self.clamp, 0.0)?;
        let t = raw.narrow(1, half, half)?;
        Ok((s, t))
    }

    fn forward(&self, a: &Tensor, b: &Tensor) -> Result<(Tensor, Tensor, Tensor)> {
        let (cond, target) = if self.transform_second { (a, b) } else { (b, a) };
        let (s, t) = self.scale_shift(cond)?;
        let moved = target.mul(&s.exp()?)?.add(&t)?;
        let log_det = s.sum(1)?;
        if self.transform_second {
            Ok((a.clone(), moved, log_det))
        } else {
            Ok((moved, b.clone(), log_det))
        }
    }

    fn inverse(&self, a: &Tensor, b: &Tensor) -> Result<(Tensor, Tensor)> {
        let (cond, target) = if self.transform_second { (a, b) } else { (b, a) };
        let (s, t) = self.scale_shift(cond)?;
        let restored = target.sub(&t)?.mul(&s.neg()?.exp()?)?;
        if self.transform_second {
            Ok((a.clone(), restored))
        } else {
            Ok((restored, b.clone()))
        }
    }
}

#[derive(Debug, Clone)]
pub struct InvertibleStack {
    pub blocks: Vec<CouplingBlock>,
}

impl InvertibleStack {
    /// Stack whose coupling outputs start at zero, i.e. a plain channel split.
    pub fn new(dim: usize, blocks: usize, width: usize, clamp: f64, rng: &mut impl Rng, dtype: DType) -> Result<Self> {
        Self::build(dim, blocks, width, clamp, true, rng, dtype)
    }

    /// Stack with every layer randomly initialised; used to exercise a
    /// non-trivial bijection.
    pub fn new_random(dim: usize, blocks: usize, width: usize, clamp: f64, rng: &mut impl Rng, dtype: DType) -> Result<Self> {
        Self::build(dim, blocks, width, clamp, false, rng, dtype)
    }

    fn build(dim: usize, blocks: usize, width: usize, clamp: f64, zero_out: bool, rng: &mut impl Rng, dtype: DType) -> Result<Self> {
        if dim == 0 || dim % 2 != 0 {
            return Err(Error::Shape(format!("invertible stack needs an even width, got {dim}")));
        }
        let blocks = (0..blocks)
            .map(|k| CouplingBlock::new(dim / 2, width, k % 2 == 0, clamp, zero_out, rng, dtype))
            .collect::<Result<_>>()?;
        Ok(InvertibleStack { blocks })
    }

    pub fn dim(&self) -> usize {
        self.blocks.first().map_or(0, |b| 2 * b.hidden.inputs())
    }

    /// `(n, d)` fusion features to `(pseudo_reference, pseudo_distortion)`,
    /// each `(n, d / 2)`.
    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, Tensor)> {
        let (pr, pd, _) = self.forward_with_log_det(x)?;
        Ok((pr, pd))
    }

    /// Forward pass plus `log|det J|` per row.
    pub fn forward_with_log_det(&self, x: &Tensor) -> Result<(Tensor, Tensor, Tensor)> {
        let (n, d) = x.dims2()?;
        if d != self.dim() {
            return Err(Error::Shape(format!(
                "invertible stack expects width {}, got {d}",
                self.dim()
            )));
        }
        let half = d / 2;
        let mut a = x.narrow(1, 0, half)?;
        let mut b = x.narrow(1, half, half)?;
        let mut log_det = Tensor::zeros(n, x.dtype(), x.device())?;
        for block in &self.blocks {
            let (na, nb, ld) = block.forward(&a, &b)?;
            a = na;
            b = nb;
            log_det = (log_det + ld)?;
        }
        Ok((a, b, log_det))
    }

    pub fn inverse(&self, pseudo_reference: &Tensor, pseudo_distortion: &Tensor) -> Result<Tensor> {
        if pseudo_reference.dims() != pseudo_distortion.dims() {
            return Err(Error::Shape(format!(
                "halves differ: {:?} vs {:?}",
                pseudo_reference.dims(),
                pseudo_distortion.dims()
            )));
        }
        let (_, half) = pseudo_reference.dims2()?;
        if 2 * half != self.dim() {
            return Err(Error::Shape(format!(
                "invertible stack expects halves of width {}, got {half}",
                self.dim() / 2
            )));
        }
        let mut a = pseudo_reference.clone();
        let mut b = pseudo_distortion.clone();
        for block in self.blocks.iter().rev() {
            let (na, nb) = block.inverse(&a, &b)?;
            a = na;
            b = nb;
        }
        Ok(Tensor::cat(&[a, b], 1)?)
    }

    pub fn named_vars(&self, prefix: &str) -> Vec<NamedVar> {
        let mut out = Vec::new();
        for (i, b) in self.blocks.iter().enumerate() {
            out.extend(b.hidden.named_vars(&format!("{prefix}.block{i}.hidden")));
            out.extend(b.out.named_vars(&format!("{prefix}.block{i}.out")));
        }
        out
    }
}
