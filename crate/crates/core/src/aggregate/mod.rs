//! Patch-to-image pooling.
//!
//! An image score is `Q = Σ w_i q_i` with `w_i = a_i / Σ_j a_j`, where `q_i`
//! is a per-patch quality and `a_i > 0` a per-patch attention logit. The
//! slice functions here are the reference arithmetic; [`AggregationHead`]
//! is the trainable tensor version.

mod head;

pub use head::{weighted_quality, AggregationHead, AggregationKind, Gru, POSITIVITY_EPS};

use crate::error::{Error, Result};

/// Attention normalization, `w_i = a_i / Σ a_j`.
pub fn normalize_weights(a: &[f64]) -> Result<Vec<f64>> {
    if a.is_empty() {
        return Err(Error::Size("no attention logits to normalize".into()));
    }
    if let Some((i, v)) = a.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::Domain(format!("attention logit {i} is {v}, must be positive and finite")));
    }
    let total: f64 = a.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::Domain(format!("attention logits sum to {total}")));
    }
    Ok(a.iter().map(|v| v / total).collect())
}

/// `Σ w_i q_i`, kept inside `[min q, max q]`.
pub fn aggregate_quality(q: &[f64], w: &[f64]) -> Result<f64> {
    if q.len() != w.len() {
        return Err(Error::Shape(format!("{} qualities but {} weights", q.len(), w.len())));
    }
    if q.is_empty() {
        return Err(Error::Size("no patches to aggregate".into()));
    }
    let raw: f64 = q.iter().zip(w).map(|(q, w)| q * w).sum();
    let lo = q.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // Rounding in Σw can push the combination an ulp past the hull.
    Ok(raw.clamp(lo, hi))
}

/// Equal-weight average, computed as [`aggregate_quality`] with `w_i = 1/n`
/// so the two agree bit-for-bit.
pub fn mean_aggregate(q: &[f64]) -> Result<f64> {
    if q.is_empty() {
        return Err(Error::Size("no patches to aggregate".into()));
    }
    let w = vec![1.0 / q.len() as f64; q.len()];
    aggregate_quality(q, &w)
}

/// [`normalize_weights`] followed by [`aggregate_quality`].
pub fn attention_aggregate(q: &[f64], a: &[f64]) -> Result<f64> {
    if q.len() != a.len() {
        return Err(Error::Shape(format!("{} qualities but {} logits", q.len(), a.len())));
    }
    aggregate_quality(q, &normalize_weights(a)?)
}
