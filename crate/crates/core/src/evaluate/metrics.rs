use crate::error::{Error, Result};

fn check_pair(pred: &[f64], label: &[f64]) -> Result<()> {
    if pred.len() != label.len() {
        return Err(Error::Shape(format!("{} predictions but {} labels", pred.len(), label.len())));
    }
    if pred.len() < 2 {
        return Err(Error::UndefinedCorrelation(format!("needs at least 2 samples, got {}", pred.len())));
    }
    if let Some(v) = pred.iter().chain(label).find(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("correlation input contains {v}")));
    }
    Ok(())
}

/// 1-based ranks, ties sharing their average rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("an input has zero variance".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman rank correlation with average ranks for ties.
pub fn srcc(pred: &[f64], label: &[f64]) -> Result<f64> {
    check_pair(pred, label)?;
    pearson(&average_ranks(pred), &average_ranks(label))
}

/// Pearson correlation on the raw values, no nonlinear remapping.
pub fn plcc(pred: &[f64], label: &[f64]) -> Result<f64> {
    check_pair(pred, label)?;
    pearson(pred, label)
}

/// Median; for an even count the mean of the two middle order statistics.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Size("median of no values".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Ok(if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 })
}
