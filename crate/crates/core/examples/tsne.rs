//! Embeds the four feature roles of an untrained model on a synthetic
//! database and writes the CSV and SVG scatter.
//!
//! cargo run --release --example tsne -- [OUT_DIR]

use std::path::PathBuf;

use pseudoref::dataset::synth::{generate, SyntheticSpec};
use pseudoref::evaluate::{tsne_export, TsneConfig};
use pseudoref::model::{QualityModel, Variant};
use pseudoref::nets::NetConfig;

fn main() -> pseudoref::Result<()> {
    let out = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("pseudoref-tsne"), PathBuf::from);
    std::fs::create_dir_all(&out).map_err(|e| pseudoref::Error::io(&out, e))?;
    let manifest = generate(&SyntheticSpec {
        references: 3,
        width: 128,
        height: 128,
        levels: 4,
        seed: 2,
    })?;
    let model = QualityModel::new(&NetConfig::compact(), Variant::FULL, 0)?;
    let cfg = TsneConfig {
        n_pairs: 36,
        epochs: 500,
        ..TsneConfig::default()
    };
    let export = tsne_export(&model, &manifest, &cfg)?;
    println!("{} pairs, perplexity {}, method {}", export.n_pairs(), export.perplexity, export.method);
    export.write_csv(&out.join("tsne.csv"))?;
    export.write_svg(&out.join("tsne.svg"), "untrained features")?;
    println!("wrote {} and tsne.svg", out.join("tsne.csv").display());
    Ok(())
}
