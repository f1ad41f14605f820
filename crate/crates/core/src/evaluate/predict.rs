use std::path::Path;

use candle_core::{DType, Tensor};
use image::RgbImage;

use crate::dataset::{crop_patches, DatabaseManifest, ImageCache};
use crate::error::{Error, Result};
use crate::model::QualityModel;
use crate::nets::patch_tensor;
use crate::trainer::load_checkpoint;

/// Raster patch grid of `image` as a `(n, 64, 64, 3)` tensor.
pub fn image_patches(image: &RgbImage) -> Result<Tensor> {
    patch_tensor(crop_patches(image)?.to_normalized(), DType::F32)
}

/// No-reference score of one image.
pub fn predict_image(model: &QualityModel, image: &RgbImage) -> Result<f64> {
    Ok(model.predict_nr(&image_patches(image)?)?.0)
}

/// Full-reference score of an aligned pair.
pub fn predict_image_fr(model: &QualityModel, image: &RgbImage, reference: &RgbImage) -> Result<f64> {
    if image.dimensions() != reference.dimensions() {
        return Err(Error::Alignment(format!(
            "image is {:?} but reference is {:?}",
            image.dimensions(),
            reference.dimensions()
        )));
    }
    Ok(model.predict_fr(&image_patches(reference)?, &image_patches(image)?)?.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    NoReference,
    FullReference,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub image_id: String,
    pub reference_id: String,
    pub distortion_type: String,
    pub dmos: f64,
    pub score: f64,
}

/// Scores the given records. In [`Mode::NoReference`] reference pixels are
/// never requested, so the manifest may have had its references stripped.
pub fn predict_records(
    model: &QualityModel,
    manifest: &DatabaseManifest,
    records: impl IntoIterator<Item = usize>,
    mode: Mode,
    cache: &mut ImageCache,
) -> Result<Vec<Prediction>> {
    let mut out = Vec::new();
    for idx in records {
        let rec = &manifest.records[idx];
        let image = cache.load(&rec.pixel_source)?;
        let score = match mode {
            Mode::NoReference => predict_image(model, &image)?,
            Mode::FullReference => {
                let reference = cache.load(manifest.reference_source(&rec.reference_id)?)?;
                predict_image_fr(model, &image, &reference).map_err(|e| match e {
                    Error::Alignment(m) => Error::Alignment(format!("{}: {m}", rec.image_id)),
                    other => other,
                })?
            }
        };
        if !score.is_finite() {
            return Err(Error::Numeric(format!("prediction for {} is {score}", rec.image_id)));
        }
        out.push(Prediction {
            image_id: rec.image_id.clone(),
            reference_id: rec.reference_id.clone(),
            distortion_type: rec.distortion_type.clone(),
            dmos: rec.dmos,
            score,
        });
    }
    Ok(out)
}

/// A trained model restored from a checkpoint, for inference only.
pub struct Predictor {
    pub model: QualityModel,
}

impl Predictor {
    pub fn from_checkpoint(path: &Path) -> Result<Self> {
        Ok(Predictor {
            model: load_checkpoint(path)?.model,
        })
    }

    pub fn predict_image(&self, image: &RgbImage) -> Result<f64> {
        predict_image(&self.model, image)
    }

    pub fn predict_image_fr(&self, image: &RgbImage, reference: &RgbImage) -> Result<f64> {
        predict_image_fr(&self.model, image, reference)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Variant;
    use crate::nets::NetConfig;
    use image::imageops;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise(w: u32, h: u32, seed: u64) -> RgbImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        RgbImage::from_fn(w, h, |_, _| image::Rgb([rng.random(), rng.random(), rng.random()]))
    }

    #[test]
    fn prediction_contracts() {
        let m = QualityModel::new(&NetConfig::compact(), Variant::FULL, 1).unwrap();
        let img = noise(150, 140, 2);
        let refimg = noise(150, 140, 3);
        let a = predict_image(&m, &img).unwrap();
        assert_eq!(a, predict_image(&m, &img).unwrap());
        let cropped = imageops::crop_imm(&img, 0, 0, 128, 128).to_image();
        assert_eq!(a, predict_image(&m, &cropped).unwrap());
        let f = predict_image_fr(&m, &img, &refimg).unwrap();
        assert_eq!(f, predict_image_fr(&m, &img, &refimg).unwrap());
        let rc = imageops::crop_imm(&refimg, 0, 0, 128, 128).to_image();
        assert_eq!(f, predict_image_fr(&m, &cropped, &rc).unwrap());
        let one = noise(64, 64, 4);
        let (q, per) = m.predict_nr(&image_patches(&one).unwrap()).unwrap();
        assert!((q - per[0]).abs() < 1e-4);
        assert!(matches!(predict_image(&m, &noise(63, 80, 0)), Err(Error::Size(_))));
        assert!(matches!(predict_image_fr(&m, &img, &noise(64, 64, 0)), Err(Error::Alignment(_))));
    }
}
