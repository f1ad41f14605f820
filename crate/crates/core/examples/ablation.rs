//! Runs the six ablation configurations for one epoch each on a tiny
//! synthetic database, with a shared split and seed.
//!
//! cargo run --release --example ablation -- [OUT_DIR]

use std::path::PathBuf;

use pseudoref::cli::{ablate, ablation_csv, RunConfig};
use pseudoref::dataset::synth::{generate, write_to_dir, SyntheticSpec};
use pseudoref::nets::NetConfig;

fn main() -> pseudoref::Result<()> {
    let out = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("pseudoref-ablation"), PathBuf::from);
    let data = out.join("data");
    let spec = SyntheticSpec {
        references: 5,
        width: 96,
        height: 96,
        levels: 2,
        seed: 3,
    };
    write_to_dir(&generate(&spec)?, &data)?;
    let net = NetConfig::compact();
    let cfg = RunConfig {
        database: Some("synthetic".into()),
        data_root: Some(data),
        max_epochs: 1,
        batch_pairs: 8,
        duplication: 4,
        feature_dim: net.feature_dim,
        conv_channels: net.conv_channels.clone(),
        inn_subnet_width: net.inn_subnet_width,
        gru_hidden: net.gru_hidden,
        ..RunConfig::default()
    };
    let rows = ablate(&cfg, &out.join("runs"))?;
    print!("{}", ablation_csv(&rows));
    Ok(())
}
