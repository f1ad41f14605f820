//! Training objective: a two-sided triplet hinge tying the pseudo features
//! to the full-reference features, plus absolute-error regression of three
//! quality predictions against the label.
//!
//! ```text
//! L_trip = Σ_i [‖F_R−F_PR‖² − ‖F_R−F_PD‖² + α]_+ + [‖F_D−F_PD‖² − ‖F_D−F_PR‖² + α]_+
//! L_reg  = Σ_j |Q̂−Q_FR| + |Q̂−Q_PR| + |Q̂−Q_NR|
//! L      = L_reg + λ · L_trip
//! ```
//!
//! Both sums are unnormalized. Subgradients at hinge and absolute-value kinks
//! are zero. Slice functions are the reference arithmetic; the `*_tensor`
//! functions are the differentiable forms used in training.

use candle_core::Tensor;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{abs, positive_part};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossConfig {
    pub lambda: f64,
    pub margin_alpha: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            lambda: 20.0,
            margin_alpha: 2.0,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be finite and non-negative, got {}", self.lambda)));
        }
        if !(self.margin_alpha >= 0.0 && self.margin_alpha.is_finite()) {
            return Err(Error::Config(format!(
                "margin_alpha must be finite and non-negative, got {}",
                self.margin_alpha
            )));
        }
        Ok(())
    }
}

/// Image-level predictions and label.
#[derive(Debug, Clone, PartialEq)]
pub struct QualityTriple {
    pub image_id: String,
    pub q_fr: f64,
    pub q_pr: f64,
    pub q_nr: f64,
    pub q_hat: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Per-sample triplet terms `(anchor F_R, anchor F_D)`.
pub fn triplet_terms(f_r: &[f64], f_pr: &[f64], f_d: &[f64], f_pd: &[f64], margin: f64) -> Result<(f64, f64)> {
    let n = f_r.len();
    if [f_pr.len(), f_d.len(), f_pd.len()].iter().any(|&l| l != n) {
        return Err(Error::Shape(format!(
            "triplet vectors differ in length: {} {} {} {}",
            n,
            f_pr.len(),
            f_d.len(),
            f_pd.len()
        )));
    }
    let t1 = (sq_dist(f_r, f_pr) - sq_dist(f_r, f_pd) + margin).max(0.0);
    let t2 = (sq_dist(f_d, f_pd) - sq_dist(f_d, f_pr) + margin).max(0.0);
    Ok((t1, t2))
}

/// Batch triplet loss over rows.
pub fn triplet_loss(f_r: &[Vec<f64>], f_pr: &[Vec<f64>], f_d: &[Vec<f64>], f_pd: &[Vec<f64>], margin: f64) -> Result<f64> {
    let n = f_r.len();
    if [f_pr.len(), f_d.len(), f_pd.len()].iter().any(|&l| l != n) {
        return Err(Error::Shape("triplet batches differ in size".into()));
    }
    let mut total = 0.0;
    for i in 0..n {
        let (a, b) = triplet_terms(&f_r[i], &f_pr[i], &f_d[i], &f_pd[i], margin)?;
        total += a + b;
    }
    Ok(total)
}

/// `(Σ|Q̂−Q_FR|, Σ|Q̂−Q_PR|, Σ|Q̂−Q_NR|)`.
pub fn regression_terms(triples: &[QualityTriple]) -> Result<(f64, f64, f64)> {
    if triples.is_empty() {
        return Err(Error::Size("regression needs at least one image".into()));
    }
    let mut acc = (0.0, 0.0, 0.0);
    for t in triples {
        if ![t.q_fr, t.q_pr, t.q_nr, t.q_hat].iter().all(|v| v.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite prediction for image {} (fr {}, pr {}, nr {}, label {})",
                t.image_id, t.q_fr, t.q_pr, t.q_nr, t.q_hat
            )));
        }
        acc.0 += (t.q_hat - t.q_fr).abs();
        acc.1 += (t.q_hat - t.q_pr).abs();
        acc.2 += (t.q_hat - t.q_nr).abs();
    }
    Ok(acc)
}

pub fn regression_loss(triples: &[QualityTriple]) -> Result<f64> {
    let (a, b, c) = regression_terms(triples)?;
    Ok(a + b + c)
}

pub fn total_loss(
    triples: &[QualityTriple],
    f_r: &[Vec<f64>],
    f_pr: &[Vec<f64>],
    f_d: &[Vec<f64>],
    f_pd: &[Vec<f64>],
    config: &LossConfig,
) -> Result<f64> {
    let reg = regression_loss(triples)?;
    if config.lambda == 0.0 {
        return Ok(reg);
    }
    Ok(reg + config.lambda * triplet_loss(f_r, f_pr, f_d, f_pd, config.margin_alpha)?)
}

/// Differentiable triplet loss over `(n, k)` feature tensors.
pub fn triplet_loss_tensor(f_r: &Tensor, f_pr: &Tensor, f_d: &Tensor, f_pd: &Tensor, margin: f64) -> Result<Tensor> {
    for t in [f_pr, f_d, f_pd] {
        if t.dims() != f_r.dims() {
            return Err(Error::Shape(format!("triplet tensors {:?} vs {:?}", f_r.dims(), t.dims())));
        }
    }
    let d = |a: &Tensor, b: &Tensor| -> Result<Tensor> { Ok(a.sub(b)?.sqr()?.sum(1)?) };
    let t1 = positive_part(&((d(f_r, f_pr)? - d(f_r, f_pd)?)? + margin)?)?;
    let t2 = positive_part(&((d(f_d, f_pd)? - d(f_d, f_pr)?)? + margin)?)?;
    Ok((t1.sum_all()? + t2.sum_all()?)?)
}

/// `Σ |target − pred|` with zero subgradient at equality.
pub fn mae_sum_tensor(pred: &Tensor, target: &Tensor) -> Result<Tensor> {
    if pred.dims() != target.dims() {
        return Err(Error::Shape(format!("predictions {:?} vs labels {:?}", pred.dims(), target.dims())));
    }
    Ok(abs(&target.sub(pred)?)?.sum_all()?)
}
