//! Tensor building blocks on top of candle: parameter initialisation, dense
//! and convolutional layers, and a few pointwise ops with the subgradient
//! conventions the losses rely on.

use candle_core::{CpuStorage, CustomOp1, DType, Device, Layout, Shape, Tensor, Var};
use rand::Rng;

use crate::error::Result;

pub const DEVICE: Device = Device::Cpu;

/// A named trainable tensor.
pub type NamedVar = (String, Var);

pub fn uniform_var(shape: &[usize], bound: f64, rng: &mut impl Rng, dtype: DType) -> Result<Var> {
    let n: usize = shape.iter().product();
    let data: Vec<f64> = (0..n)
        .map(|_| if bound > 0.0 { rng.random_range(-bound..bound) } else { 0.0 })
        .collect();
    let t = Tensor::from_vec(data, shape, &DEVICE)?.to_dtype(dtype)?;
    Ok(Var::from_tensor(&t)?)
}

pub fn zeros_var(shape: &[usize], dtype: DType) -> Result<Var> {
    Ok(Var::zeros(shape, dtype, &DEVICE)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    /// `U(-b, b)` with `b = gain / sqrt(fan_in)`; the bias uses `1 / sqrt(fan_in)`.
    FanIn { gain: f64 },
    Zeros,
}

impl Init {
    /// Default dense-layer initialisation.
    pub const LINEAR: Init = Init::FanIn { gain: 1.0 };
    /// He-style bound for layers followed by a ReLU, `sqrt(6 / fan_in)`.
    pub const RELU: Init = Init::FanIn { gain: 2.449_489_742_783_178 };
}

/// Dense layer, `y = x W + b` with `W` stored `(in, out)`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: Var,
    pub bias: Var,
}

impl Linear {
    pub fn new(inputs: usize, outputs: usize, init: Init, rng: &mut impl Rng, dtype: DType) -> Result<Self> {
        let (wb, bb) = match init {
            Init::FanIn { gain } => (gain / (inputs as f64).sqrt(), 1.0 / (inputs as f64).sqrt()),
            Init::Zeros => (0.0, 0.0),
        };
        Ok(Linear {
            weight: uniform_var(&[inputs, outputs], wb, rng, dtype)?,
            bias: uniform_var(&[outputs], bb, rng, dtype)?,
        })
    }

    pub fn inputs(&self) -> usize {
        self.weight.dims()[0]
    }

    pub fn outputs(&self) -> usize {
        self.weight.dims()[1]
    }

    /// Applies the layer over the last dimension of `x`.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let dims = x.dims().to_vec();
        let last = *dims.last().unwrap_or(&0);
        if last != self.inputs() {
            return Err(crate::Error::Shape(format!(
                "dense layer expects width {}, got {:?}",
                self.inputs(),
                dims
            )));
        }
        let rows = x.elem_count() / last.max(1);
        let y = x
            .reshape((rows, last))?
            .matmul(self.weight.as_tensor())?
            .broadcast_add(self.bias.as_tensor())?;
        let mut out_dims = dims;
        *out_dims.last_mut().unwrap() = self.outputs();
        Ok(y.reshape(out_dims)?)
    }

    pub fn named_vars(&self, prefix: &str) -> Vec<NamedVar> {
        vec![
            (format!("{prefix}.weight"), self.weight.clone()),
            (format!("{prefix}.bias"), self.bias.clone()),
        ]
    }
}

/// 3×3 convolution on NHWC tensors, lowered to im2col + matmul.
/// The weight is stored `(3 * 3 * in, out)` in `(ky, kx, c)` row order.
#[derive(Debug, Clone)]
pub struct Conv3x3 {
    pub weight: Var,
    pub bias: Var,
    pub stride: usize,
}

impl Conv3x3 {
    pub fn new(inputs: usize, outputs: usize, stride: usize, rng: &mut impl Rng, dtype: DType) -> Result<Self> {
        let fan_in = 9 * inputs;
        let Init::FanIn { gain } = Init::RELU else { unreachable!() };
        Ok(Conv3x3 {
            weight: uniform_var(&[fan_in, outputs], gain / (fan_in as f64).sqrt(), rng, dtype)?,
            bias: uniform_var(&[outputs], 1.0 / (fan_in as f64).sqrt(), rng, dtype)?,
            stride,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (b, h, w, _) = x.dims4()?;
        let op = Im2Col {
            kernel: 3,
            stride: self.stride,
            pad: 1,
        };
        let (oh, ow) = op.out_hw(h, w);
        let cols = x.contiguous()?.apply_op1(op)?;
        let out = cols
            .matmul(self.weight.as_tensor())?
            .broadcast_add(self.bias.as_tensor())?;
        Ok(out.reshape((b, oh, ow, self.weight.dims()[1]))?)
    }

    pub fn named_vars(&self, prefix: &str) -> Vec<NamedVar> {
        vec![
            (format!("{prefix}.weight"), self.weight.clone()),
            (format!("{prefix}.bias"), self.bias.clone()),
        ]
    }
}

/// Unfolds NHWC input `(b, h, w, c)` into `(b * oh * ow, k * k * c)`.
#[derive(Debug, Clone, Copy)]
pub struct Im2Col {
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

impl Im2Col {
    pub fn out_hw(&self, h: usize, w: usize) -> (usize, usize) {
        (
            (h + 2 * self.pad - self.kernel) / self.stride + 1,
            (w + 2 * self.pad - self.kernel) / self.stride + 1,
        )
    }

    /// Calls `f(column_offset, input_offset)` for every in-bounds tap.
    fn for_each_tap(&self, b: usize, h: usize, w: usize, c: usize, mut f: impl FnMut(usize, usize)) {
        let (oh, ow) = self.out_hw(h, w);
        let k = self.kernel;
        let row_len = k * k * c;
        for bi in 0..b {
            for oy in 0..oh {
                for ox in 0..ow {
                    let row = ((bi * oh + oy) * ow + ox) * row_len;
                    for ky in 0..k {
                        let iy = (oy * self.stride + ky) as isize - self.pad as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for kx in 0..k {
                            let ix = (ox * self.stride + kx) as isize - self.pad as isize;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            let src = ((bi * h + iy as usize) * w + ix as usize) * c;
                            f(row + (ky * k + kx) * c, src);
                        }
                    }
                }
            }
        }
    }

    fn unfold<T: Copy + Default>(&self, x: &[T], b: usize, h: usize, w: usize, c: usize) -> Vec<T> {
        let (oh, ow) = self.out_hw(h, w);
        let mut out = vec![T::default(); b * oh * ow * self.kernel * self.kernel * c];
        self.for_each_tap(b, h, w, c, |dst, src| {
            out[dst..dst + c].copy_from_slice(&x[src..src + c]);
        });
        out
    }

    fn fold<T: Copy + Default + std::ops::AddAssign>(
        &self,
        cols: &[T],
        b: usize,
        h: usize,
        w: usize,
        c: usize,
    ) -> Vec<T> {
        let mut out = vec![T::default(); b * h * w * c];
        self.for_each_tap(b, h, w, c, |col, dst| {
            for j in 0..c {
                out[dst + j] += cols[col + j];
            }
        });
        out
    }
}

fn contiguous_slice<'a, T>(data: &'a [T], layout: &Layout) -> candle_core::Result<&'a [T]> {
    match layout.contiguous_offsets() {
        Some((start, end)) => Ok(&data[start..end]),
        None => candle_core::bail!("im2col/col2im expect contiguous input"),
    }
}

impl CustomOp1 for Im2Col {
    fn name(&self) -> &'static str {
        "im2col"
    }

    fn cpu_fwd(&self, storage: &CpuStorage, layout: &Layout) -> candle_core::Result<(CpuStorage, Shape)> {
        let (b, h, w, c) = layout.shape().dims4()?;
        let (oh, ow) = self.out_hw(h, w);
        let out = match storage {
            CpuStorage::F32(v) => CpuStorage::F32(self.unfold(contiguous_slice(v, layout)?, b, h, w, c)),
            CpuStorage::F64(v) => CpuStorage::F64(self.unfold(contiguous_slice(v, layout)?, b, h, w, c)),
            _ => candle_core::bail!("im2col supports f32 and f64 only"),
        };
        Ok((out, Shape::from((b * oh * ow, self.kernel * self.kernel * c))))
    }

    fn bwd(&self, arg: &Tensor, _res: &Tensor, grad: &Tensor) -> candle_core::Result<Option<Tensor>> {
        let (b, h, w, c) = arg.dims4()?;
        let fold = Col2Im {
            unfold: *self,
            dims: (b, h, w, c),
        };
        Ok(Some(grad.contiguous()?.apply_op1_no_bwd(&fold)?))
    }
}

/// Adjoint of [`Im2Col`]: scatter-adds columns back onto the input grid.
struct Col2Im {
    unfold: Im2Col,
    dims: (usize, usize, usize, usize),
}

impl CustomOp1 for Col2Im {
    fn name(&self) -> &'static str {
        "col2im"
    }

    fn cpu_fwd(&self, storage: &CpuStorage, layout: &Layout) -> candle_core::Result<(CpuStorage, Shape)> {
        let (b, h, w, c) = self.dims;
        let out = match storage {
            CpuStorage::F32(v) => CpuStorage::F32(self.unfold.fold(contiguous_slice(v, layout)?, b, h, w, c)),
            CpuStorage::F64(v) => CpuStorage::F64(self.unfold.fold(contiguous_slice(v, layout)?, b, h, w, c)),
            _ => candle_core::bail!("col2im supports f32 and f64 only"),
        };
        Ok((out, Shape::from((b, h, w, c))))
    }
}

/// `max(x, 0)` whose subgradient at exactly zero is 0.
pub fn positive_part(x: &Tensor) -> Result<Tensor> {
    let mask = x.gt(0.0)?.to_dtype(x.dtype())?;
    Ok(x.mul(&mask)?)
}

/// `|x|` whose subgradient at exactly zero is 0.
pub fn abs(x: &Tensor) -> Result<Tensor> {
    let sign = (x.gt(0.0)?.to_dtype(x.dtype())? - x.lt(0.0)?.to_dtype(x.dtype())?)?;
    Ok(x.mul(&sign)?)
}

pub fn sigmoid(x: &Tensor) -> Result<Tensor> {
    Ok((x.neg()?.exp()? + 1.0)?.recip()?)
}

/// Numerically stable `ln(1 + e^x)`.
pub fn softplus(x: &Tensor) -> Result<Tensor> {
    let relu = x.relu()?;
    let tail = (x.abs()?.neg()?.exp()? + 1.0)?.log()?;
    Ok((relu + tail)?)
}

pub fn scalar(t: &Tensor) -> Result<f64> {
    Ok(t.to_dtype(DType::F64)?.to_scalar::<f64>()?)
}

pub fn to_vec_f64(t: &Tensor) -> Result<Vec<f64>> {
    Ok(t.to_dtype(DType::F64)?.flatten_all()?.to_vec1::<f64>()?)
}
