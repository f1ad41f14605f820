use candle_core::{DType, Tensor};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{sigmoid, softplus, Init, Linear, NamedVar, DEVICE};

/// Offset added after softplus so attention logits stay strictly positive.
pub const POSITIVITY_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationKind {
    /// Equal weights.
    Mean,
    /// Logit from each patch's own feature through a small MLP.
    PerPatchWeight,
    /// Logits from a GRU run over the patches in raster order.
    Gru,
}

impl AggregationKind {
    pub fn name(self) -> &'static str {
        match self {
            AggregationKind::Mean => "mean",
            AggregationKind::PerPatchWeight => "per_patch_weight",
            AggregationKind::Gru => "gru",
        }
    }
}

/// Single-layer unidirectional GRU with PyTorch gate ordering `(r, z, n)`.
#[derive(Debug, Clone)]
pub struct Gru {
    pub input: Linear,
    pub hidden: Linear,
}

impl Gru {
    pub fn new(inputs: usize, hidden: usize, rng: &mut impl Rng, dtype: DType) -> Result<Self> {
        let bound = 1.0 / (hidden as f64).sqrt();
        let mut layer = |i: usize| -> Result<Linear> {
            let weight = crate::tensor::uniform_var(&[i, 3 * hidden], bound, rng, dtype)?;
            let bias = crate::tensor::uniform_var(&[3 * hidden], bound, rng, dtype)?;
            Ok(Linear { weight, bias })
        };
        Ok(Gru {
            input: layer(inputs)?,
            hidden: layer(hidden)?,
        })
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden.inputs()
    }

    /// `(g, t, d)` sequences to `(g, t, hidden)` per-step states, `h_0 = 0`.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (g, t, _) = x.dims3()?;
        let hs = self.hidden_size();
        let xp = self.input.forward(x)?;
        let mut h = Tensor::zeros((g, hs), x.dtype(), &DEVICE)?;
        let mut states = Vec::with_capacity(t);
        for step in 0..t {
            let xs = xp.narrow(1, step, 1)?.squeeze(1)?;
            let hp = self.hidden.forward(&h)?;
            let r = sigmoid(&(xs.narrow(1, 0, hs)? + hp.narrow(1, 0, hs)?)?)?;
            let z = sigmoid(&(xs.narrow(1, hs, hs)? + hp.narrow(1, hs, hs)?)?)?;
            let n = (xs.narrow(1, 2 * hs, hs)? + r.mul(&hp.narrow(1, 2 * hs, hs)?)?)?.tanh()?;
            h = (z.affine(-1.0, 1.0)?.mul(&n)? + z.mul(&h)?)?;
            states.push(h.clone());
        }
        Ok(Tensor::stack(&states, 1)?)
    }

    pub fn named_vars(&self, prefix: &str) -> Vec<NamedVar> {
        let mut v = self.input.named_vars(&format!("{prefix}.input"));
        v.extend(self.hidden.named_vars(&format!("{prefix}.hidden")));
        v
    }
}

#[derive(Debug, Clone)]
enum Attention {
    Mean,
    PerPatch { hidden: Linear, out: Linear },
    Gru { gru: Gru, out: Linear },
}

/// Quality FC plus an attention branch over the patches of each group.
#[derive(Debug, Clone)]
pub struct AggregationHead {
    pub kind: AggregationKind,
    pub quality: Linear,
    attention: Attention,
}

impl AggregationHead {
    pub fn new(kind: AggregationKind, inputs: usize, hidden: usize, rng: &mut impl Rng, dtype: DType) -> Result<Self> {
        let quality = Linear::new(inputs, 1, Init::LINEAR, rng, dtype)?;
        let attention = match kind {
            AggregationKind::Mean => Attention::Mean,
            AggregationKind::PerPatchWeight => Attention::PerPatch {
                hidden: Linear::new(inputs, hidden, Init::RELU, rng, dtype)?,
                out: Linear::new(hidden, 1, Init::LINEAR, rng, dtype)?,
            },
            AggregationKind::Gru => Attention::Gru {
                gru: Gru::new(inputs, hidden, rng, dtype)?,
                out: Linear::new(hidden, 1, Init::LINEAR, rng, dtype)?,
            },
        };
        Ok(AggregationHead { kind, quality, attention })
    }

    pub fn inputs(&self) -> usize {
        self.quality.inputs()
    }

    fn check(&self, features: &Tensor) -> Result<(usize, usize)> {
        let (g, t, d) = features.dims3().map_err(|_| {
            Error::Shape(format!("expected (groups, patches, {}) features, got {:?}", self.inputs(), features.dims()))
        })?;
        if d != self.inputs() {
            return Err(Error::Shape(format!("aggregation head expects width {}, got {d}", self.inputs())));
        }
        if t == 0 || g == 0 {
            return Err(Error::Size("no patches to aggregate".into()));
        }
        Ok((g, t))
    }

    /// `(g, t, d)` to per-patch qualities `(g, t)`.
    pub fn patch_quality(&self, features: &Tensor) -> Result<Tensor> {
        self.check(features)?;
        Ok(self.quality.forward(features)?.squeeze(2)?)
    }

    /// `(g, t, d)` to strictly positive logits `(g, t)`; all ones for the
    /// mean head.
    pub fn attention_logits(&self, features: &Tensor) -> Result<Tensor> {
        let (g, t) = self.check(features)?;
        let raw = match &self.attention {
            Attention::Mean => return Ok(Tensor::ones((g, t), features.dtype(), &DEVICE)?),
            Attention::PerPatch { hidden, out } => out.forward(&hidden.forward(features)?.relu()?)?,
            Attention::Gru { gru, out } => out.forward(&gru.forward(features)?)?,
        };
        Ok((softplus(&raw.squeeze(2)?)? + POSITIVITY_EPS)?)
    }

    /// Per-group image score `(g,)` together with the per-patch qualities.
    pub fn forward(&self, features: &Tensor) -> Result<(Tensor, Tensor)> {
        let q = self.patch_quality(features)?;
        let score = match self.kind {
            AggregationKind::Mean => q.mean(1)?,
            _ => weighted_quality(&q, &self.attention_logits(features)?)?,
        };
        Ok((score, q))
    }

    pub fn named_vars(&self, prefix: &str) -> Vec<NamedVar> {
        let mut v = self.quality.named_vars(&format!("{prefix}.quality"));
        match &self.attention {
            Attention::Mean => {}
            Attention::PerPatch { hidden, out } => {
                v.extend(hidden.named_vars(&format!("{prefix}.attn_hidden")));
                v.extend(out.named_vars(&format!("{prefix}.attn_out")));
            }
            Attention::Gru { gru, out } => {
                v.extend(gru.named_vars(&format!("{prefix}.gru")));
                v.extend(out.named_vars(&format!("{prefix}.attn_out")));
            }
        }
        v
    }
}

/// `Σ a q / Σ a` along the patch axis of `(g, t)` tensors.
pub fn weighted_quality(q: &Tensor, a: &Tensor) -> Result<Tensor> {
    if q.dims() != a.dims() {
        return Err(Error::Shape(format!("qualities {:?} vs logits {:?}", q.dims(), a.dims())));
    }
    Ok(q.mul(a)?.sum(1)?.div(&a.sum(1)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::to_vec_f64;
    use candle_core::Var;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, dims: (usize, usize, usize)) -> Tensor {
        let n = dims.0 * dims.1 * dims.2;
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        Tensor::from_vec(v, dims, &DEVICE).unwrap()
    }

    #[test]
    fn logits_positive_and_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for kind in [AggregationKind::Mean, AggregationKind::PerPatchWeight, AggregationKind::Gru] {
            let head = AggregationHead::new(kind, 6, 8, &mut rng, DType::F64).unwrap();
            let f = random(&mut rng, (3, 5, 6));
            let a = to_vec_f64(&head.attention_logits(&f).unwrap()).unwrap();
            assert_eq!(a.len(), 15);
            assert!(a.iter().all(|v| *v > 0.0));
            let (score, q) = head.forward(&f).unwrap();
            assert_eq!(score.dims(), &[3]);
            assert_eq!(q.dims(), &[3, 5]);
            let single = random(&mut rng, (1, 1, 6));
            let (s, q) = head.forward(&single).unwrap();
            assert!((to_vec_f64(&s).unwrap()[0] - to_vec_f64(&q).unwrap()[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn patch_quality_is_rowwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let head = AggregationHead::new(AggregationKind::Gru, 4, 8, &mut rng, DType::F64).unwrap();
        let row = random(&mut rng, (1, 1, 4));
        let dup = Tensor::cat(&[&row, &row], 1).unwrap();
        let q = to_vec_f64(&head.patch_quality(&dup).unwrap()).unwrap();
        assert_eq!(q[0], q[1]);
    }

    #[test]
    fn zero_head_gives_zero_quality() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut head = AggregationHead::new(AggregationKind::Gru, 4, 8, &mut rng, DType::F64).unwrap();
        head.quality = Linear::new(4, 1, Init::Zeros, &mut rng, DType::F64).unwrap();
        let zeros = Tensor::zeros((1, 3, 4), DType::F64, &DEVICE).unwrap();
        assert_eq!(to_vec_f64(&head.patch_quality(&zeros).unwrap()).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn gru_is_order_sensitive() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let head = AggregationHead::new(AggregationKind::Gru, 4, 8, &mut rng, DType::F64).unwrap();
        let f = random(&mut rng, (1, 4, 4));
        let rev = Tensor::cat(&(0..4).rev().map(|i| f.narrow(1, i, 1).unwrap()).collect::<Vec<_>>(), 1).unwrap();
        let a = to_vec_f64(&head.attention_logits(&f).unwrap()).unwrap();
        let mut b = to_vec_f64(&head.attention_logits(&rev).unwrap()).unwrap();
        b.reverse();
        assert_ne!(a, b);
    }

    #[test]
    fn width_and_empty_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let head = AggregationHead::new(AggregationKind::Mean, 4, 8, &mut rng, DType::F64).unwrap();
        assert!(matches!(head.forward(&random(&mut rng, (1, 2, 5))), Err(Error::Shape(_))));
        let empty = Tensor::zeros((1, 0, 4), DType::F64, &DEVICE).unwrap();
        assert!(matches!(head.attention_logits(&empty), Err(Error::Size(_))));
    }

    #[test]
    fn weighted_quality_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let q: Vec<f64> = (0..16).map(|_| rng.random_range(-5.0..5.0)).collect();
        let a: Vec<f64> = (0..16).map(|_| rng.random_range(0.1..3.0)).collect();
        let qv = Var::from_tensor(&Tensor::from_vec(q.clone(), (1, 16), &DEVICE).unwrap()).unwrap();
        let av = Var::from_tensor(&Tensor::from_vec(a.clone(), (1, 16), &DEVICE).unwrap()).unwrap();
        let out = weighted_quality(qv.as_tensor(), av.as_tensor()).unwrap().sum_all().unwrap();
        let grads = out.backward().unwrap();
        let gq = to_vec_f64(grads.get(qv.as_tensor()).unwrap()).unwrap();
        let ga = to_vec_f64(grads.get(av.as_tensor()).unwrap()).unwrap();
        let f = |q: &[f64], a: &[f64]| crate::aggregate::attention_aggregate(q, a).unwrap();
        let h = 1e-4;
        for i in 0..16 {
            let (mut qp, mut qm) = (q.clone(), q.clone());
            qp[i] += h;
            qm[i] -= h;
            let fd = (f(&qp, &a) - f(&qm, &a)) / (2.0 * h);
            assert!((fd - gq[i]).abs() <= 1e-3 * fd.abs().max(1e-8));
            let (mut ap, mut am) = (a.clone(), a.clone());
            ap[i] += h;
            am[i] -= h;
            let fd = (f(&q, &ap) - f(&q, &am)) / (2.0 * h);
            assert!((fd - ga[i]).abs() <= 1e-3 * fd.abs().max(1e-8));
        }
    }
}
