//! Overfits the compact network on a generated one-reference database and
//! reports training-set correlations of the final model.
//!
//! cargo run --release --example synthetic_training -- [EPOCHS] [OUT_DIR] [LR]

use std::path::PathBuf;

use pseudoref::dataset::synth::{generate, SyntheticSpec};
use pseudoref::dataset::{ImageCache, SplitSpec};
use pseudoref::evaluate::{plcc, predict_records, srcc, Mode};
use pseudoref::model::Variant;
use pseudoref::nets::NetConfig;
use pseudoref::trainer::{fit, load_checkpoint, TrainConfig};

fn main() -> pseudoref::Result<()> {
    let mut args = std::env::args().skip(1);
    let epochs = args.next().map_or(300, |s| s.parse().expect("EPOCHS is an integer"));
    let out = args.next().map_or_else(|| std::env::temp_dir().join("pseudoref-synthetic"), PathBuf::from);
    let lr = args.next().map_or(TrainConfig::default().learning_rate, |s| s.parse().expect("LR is a number"));

    let manifest = generate(&SyntheticSpec::default())?;
    println!("{}", manifest.summary());
    let split = SplitSpec::train_only(manifest.reference_ids(), 0);
    let cfg = TrainConfig {
        max_epochs: epochs,
        learning_rate: lr,
        ..TrainConfig::default()
    };
    let outcome = fit(&cfg, &NetConfig::compact(), Variant::FULL, &manifest, &split, &out)?;
    for r in outcome.history.iter().step_by((epochs as usize / 10).max(1)) {
        println!("epoch {:>4}  loss {:>10.3}  srcc {:?}", r.epoch, r.losses.total, r.val_srcc);
    }

    let model = load_checkpoint(&outcome.final_checkpoint)?.model;
    let preds = predict_records(&model, &manifest, 0..manifest.records.len(), Mode::NoReference, &mut ImageCache::new())?;
    let score: Vec<f64> = preds.iter().map(|p| p.score).collect();
    let dmos: Vec<f64> = preds.iter().map(|p| p.dmos).collect();
    println!(
        "final model on the training set: SRCC {:.4}  PLCC {:.4}",
        srcc(&score, &dmos)?,
        plcc(&score, &dmos)?
    );
    println!("checkpoints and log under {}", out.display());
    Ok(())
}
