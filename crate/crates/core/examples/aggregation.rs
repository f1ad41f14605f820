//! Pools per-patch qualities into an image score under the three pooling
//! rules and shows where the weighted score lands relative to the mean.

use pseudoref::aggregate::{attention_aggregate, mean_aggregate, normalize_weights};

fn main() -> pseudoref::Result<()> {
    let q = [72.0, 65.0, 40.0, 38.0, 80.0, 55.0];
    // A salient, badly distorted region draws most of the attention.
    let a = [0.5, 0.5, 3.0, 2.5, 0.2, 1.0];
    let w = normalize_weights(&a)?;
    println!("patch qualities  {q:?}");
    println!("weights          {:?}", w.iter().map(|v| (v * 1000.0).round() / 1000.0).collect::<Vec<_>>());
    println!("mean pooling     {:.3}", mean_aggregate(&q)?);
    println!("attention pooling {:.3}", attention_aggregate(&q, &a)?);
    println!("uniform logits   {:.3}", attention_aggregate(&q, &[1.0; 6])?);
    Ok(())
}
