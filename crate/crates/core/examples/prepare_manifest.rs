//! Generates a small synthetic database on disk, reloads it through the
//! adapter, splits it by reference and writes the manifest cache.
//!
//! cargo run --example prepare_manifest -- [OUT_DIR]

use std::path::PathBuf;

use pseudoref::dataset::synth::{generate, write_to_dir, SyntheticSpec};
use pseudoref::dataset::{load_manifest, split_by_reference, DatabaseKind, DEFAULT_RATIOS};

fn main() -> pseudoref::Result<()> {
    let out = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("pseudoref-prepare"), PathBuf::from);
    let spec = SyntheticSpec {
        references: 10,
        width: 128,
        height: 128,
        levels: 4,
        seed: 1,
    };
    write_to_dir(&generate(&spec)?, &out)?;
    let manifest = load_manifest(&out, DatabaseKind::Synthetic)?;
    println!("{}", manifest.summary());
    let split = split_by_reference(&manifest, DEFAULT_RATIOS, 0)?;
    println!("split by reference (train/val/test): {:?}, disjoint {}", split.counts(), split.is_disjoint());
    for (_, rec) in manifest.records_for(&split.test_refs).take(4) {
        println!("  test {} <- {} {} dmos {:.1}", rec.image_id, rec.reference_id, rec.distortion_type, rec.dmos);
    }
    manifest.write_csv(&out.join("manifest.csv"))?;
    println!("wrote {}", out.join("manifest.csv").display());
    Ok(())
}
