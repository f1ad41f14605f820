//! Procedurally generated toy IQA databases.
//!
//! Each reference is a smooth colour field overlaid with oriented gratings
//! and a few hard-edged shapes. Distorted versions apply Gaussian blur,
//! additive Gaussian noise or JPEG compression at graded levels; the
//! pseudo-DMOS grows linearly with the level, identically for every type.

use std::collections::BTreeMap;
use std::io::Cursor;
use std::path::Path;
use std::sync::Arc;

use image::{Rgb, RgbImage};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{DatabaseKind, DatabaseManifest, ImageRecord, PixelSource};
use crate::error::{Error, Result};
use crate::seed::{self, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub references: usize,
    pub width: u32,
    pub height: u32,
    /// Levels per distortion type; three types give `3 * levels` images per reference.
    pub levels: u8,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            references: 1,
            width: 192,
            height: 192,
            levels: 8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticDistortion {
    Blur,
    Noise,
    Jpeg,
}

impl SyntheticDistortion {
    pub const ALL: [SyntheticDistortion; 3] = [
        SyntheticDistortion::Blur,
        SyntheticDistortion::Noise,
        SyntheticDistortion::Jpeg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SyntheticDistortion::Blur => "blur",
            SyntheticDistortion::Noise => "noise",
            SyntheticDistortion::Jpeg => "jpeg",
        }
    }
}

/// Pseudo-DMOS of `level` out of `levels`, strictly increasing in `level`.
pub fn pseudo_dmos(level: u8, levels: u8) -> f64 {
    100.0 * level as f64 / (levels as f64 + 1.0)
}

pub fn reference_image(width: u32, height: u32, seed: u64) -> RgbImage {
    let mut rng = seed::rng(seed, Stream::Init, &[0x5eed, width as u64, height as u64]);
    let base: [f32; 3] = [rng.random_range(60.0..190.0), rng.random_range(60.0..190.0), rng.random_range(60.0..190.0)];
    let grad: [f32; 3] = [rng.random_range(-60.0..60.0), rng.random_range(-60.0..60.0), rng.random_range(-60.0..60.0)];
    let gratings: Vec<(f32, f32, f32, [f32; 3])> = (0..4)
        .map(|_| {
            let theta: f32 = rng.random_range(0.0..std::f32::consts::PI);
            let freq: f32 = rng.random_range(0.03..0.35);
            let phase: f32 = rng.random_range(0.0..6.28);
            let amp = [rng.random_range(5.0..30.0), rng.random_range(5.0..30.0), rng.random_range(5.0..30.0)];
            (theta, freq, phase, amp)
        })
        .collect();
    let shapes: Vec<(f32, f32, f32, [f32; 3])> = (0..6)
        .map(|_| {
            let cx = rng.random_range(0.0..width as f32);
            let cy = rng.random_range(0.0..height as f32);
            let r = rng.random_range(8.0..(width.min(height) as f32 / 3.0));
            let shift = [rng.random_range(-70.0..70.0), rng.random_range(-70.0..70.0), rng.random_range(-70.0..70.0)];
            (cx, cy, r, shift)
        })
        .collect();
    RgbImage::from_fn(width, height, |x, y| {
        let (fx, fy) = (x as f32, y as f32);
        let u = fx / width as f32;
        let mut px = [0.0f32; 3];
        for c in 0..3 {
            px[c] = base[c] + grad[c] * (u - 0.5);
        }
        for (theta, freq, phase, amp) in &gratings {
            let t = (fx * theta.cos() + fy * theta.sin()) * freq + phase;
            let s = t.sin();
            for c in 0..3 {
                px[c] += amp[c] * s;
            }
        }
        for (cx, cy, r, shift) in &shapes {
            if (fx - cx).powi(2) + (fy - cy).powi(2) < r * r {
                for c in 0..3 {
                    px[c] += shift[c];
                }
            }
        }
        Rgb(px.map(|v| v.round().clamp(0.0, 255.0) as u8))
    })
}

pub fn blur(image: &RgbImage, level: u8) -> RgbImage {
    image::imageops::blur(image, 0.6 * level as f32)
}

pub fn add_noise(image: &RgbImage, level: u8, seed: u64) -> RgbImage {
    let mut rng = seed::rng(seed, Stream::Init, &[0x9015e, level as u64]);
    let normal = Normal::new(0.0f32, 5.0 * level as f32).expect("positive sigma");
    let mut out = image.clone();
    for v in out.iter_mut() {
        *v = (*v as f32 + normal.sample(&mut rng)).round().clamp(0.0, 255.0) as u8;
    }
    out
}

pub fn jpeg(image: &RgbImage, level: u8) -> Result<RgbImage> {
    let quality = (70i32 - 9 * level as i32).clamp(2, 100) as u8;
    let mut buf = Cursor::new(Vec::new());
    let enc = image::codecs::jpeg::JpegEncoder::new_with_quality(&mut buf, quality);
    image
        .write_with_encoder(enc)
        .map_err(|e| Error::Numeric(format!("jpeg encode failed: {e}")))?;
    let decoded = image::load_from_memory_with_format(buf.get_ref(), image::ImageFormat::Jpeg)
        .map_err(|e| Error::Numeric(format!("jpeg decode failed: {e}")))?;
    Ok(decoded.to_rgb8())
}

pub fn distort(image: &RgbImage, kind: SyntheticDistortion, level: u8, seed: u64) -> Result<RgbImage> {
    match kind {
        SyntheticDistortion::Blur => Ok(blur(image, level)),
        SyntheticDistortion::Noise => Ok(add_noise(image, level, seed)),
        SyntheticDistortion::Jpeg => jpeg(image, level),
    }
}

/// Builds an in-memory synthetic database.
pub fn generate(spec: &SyntheticSpec) -> Result<DatabaseManifest> {
    if spec.width < 64 || spec.height < 64 || spec.levels == 0 || spec.references == 0 {
        return Err(Error::Config(format!("degenerate synthetic spec {spec:?}")));
    }
    let mut references = BTreeMap::new();
    let mut records = Vec::new();
    for r in 0..spec.references {
        let ref_id = format!("ref{r:02}");
        let ref_seed = seed::derive(spec.seed, Stream::Init, &[r as u64]);
        let reference = Arc::new(reference_image(spec.width, spec.height, ref_seed));
        for kind in SyntheticDistortion::ALL {
            for level in 1..=spec.levels {
                let img = distort(&reference, kind, level, ref_seed)?;
                let dmos = pseudo_dmos(level, spec.levels);
                records.push(ImageRecord {
                    image_id: format!("{ref_id}_{}_{level}.png", kind.name()),
                    reference_id: ref_id.clone(),
                    distortion_type: kind.name().to_string(),
                    distortion_level: level,
                    raw_score: dmos,
                    dmos,
                    pixel_source: PixelSource::Memory(Arc::new(img)),
                });
            }
        }
        references.insert(ref_id, PixelSource::Memory(reference));
    }
    Ok(DatabaseManifest {
        kind: DatabaseKind::Synthetic,
        records,
        references,
        score_file: None,
        excluded: 0,
    })
}

/// Writes a manifest with in-memory pixels into the native synthetic layout
/// (`scores.csv`, `reference/`, `distorted/`) under `root`.
pub fn write_to_dir(manifest: &DatabaseManifest, root: &Path) -> Result<()> {
    let ref_dir = root.join("reference");
    let dist_dir = root.join("distorted");
    for d in [&ref_dir, &dist_dir] {
        std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    let save = |src: &PixelSource, path: &Path| -> Result<()> {
        let img = src.load()?;
        img.save(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
    };
    for (id, src) in &manifest.references {
        save(src, &ref_dir.join(format!("{id}.png")))?;
    }
    let scores = root.join("scores.csv");
    let mut w = csv::Writer::from_path(&scores).map_err(|e| super::manifest::csv_err(&scores, e))?;
    w.write_record(["image", "reference", "distortion", "level", "dmos"])
        .map_err(|e| super::manifest::csv_err(&scores, e))?;
    for r in &manifest.records {
        save(&r.pixel_source, &dist_dir.join(&r.image_id))?;
        w.write_record([
            r.image_id.clone(),
            format!("{}.png", r.reference_id),
            r.distortion_type.clone(),
            r.distortion_level.to_string(),
            r.dmos.to_string(),
        ])
        .map_err(|e| super::manifest::csv_err(&scores, e))?;
    }
    w.flush().map_err(|e| Error::io(&scores, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_set_shape() {
        let m = generate(&SyntheticSpec::default()).unwrap();
        assert_eq!(m.records.len(), 24);
        assert_eq!(m.references.len(), 1);
        m.validate(Default::default()).unwrap();
    }

    #[test]
    fn distortion_strength_grows_with_level() {
        let reference = reference_image(128, 128, 3);
        let mse = |a: &RgbImage, b: &RgbImage| -> f64 {
            a.iter()
                .zip(b.iter())
                .map(|(&x, &y)| (x as f64 - y as f64).powi(2))
                .sum::<f64>()
                / a.len() as f64
        };
        for kind in SyntheticDistortion::ALL {
            let errs: Vec<f64> = [1u8, 4, 8]
                .iter()
                .map(|&l| mse(&reference, &distort(&reference, kind, l, 3).unwrap()))
                .collect();
            assert!(errs[0] < errs[1] && errs[1] < errs[2], "{kind:?}: {errs:?}");
        }
    }

    #[test]
    fn pseudo_dmos_is_monotone() {
        let v: Vec<f64> = (1..=8).map(|l| pseudo_dmos(l, 8)).collect();
        assert!(v.windows(2).all(|w| w[0] < w[1]));
        assert!(v.iter().all(|d| (0.0..=100.0).contains(d)));
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate(&SyntheticSpec::default()).unwrap();
        let b = generate(&SyntheticSpec::default()).unwrap();
        for (x, y) in a.records.iter().zip(&b.records) {
            assert_eq!(*x.pixel_source.load().unwrap(), *y.pixel_source.load().unwrap());
        }
    }
}
