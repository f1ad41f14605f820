use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

use image::RgbImage;
use rand::seq::SliceRandom;
use rand::Rng;

use super::{DatabaseManifest, Patch, PixelSource, SplitSpec, PATCH_SIZE};
use crate::error::{Error, Result};
use crate::seed::{self, Stream};

/// Decoded-image cache keyed by file path; in-memory sources bypass it.
#[derive(Default)]
pub struct ImageCache {
    images: HashMap<PathBuf, Arc<RgbImage>>,
}

impl ImageCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn load(&mut self, source: &PixelSource) -> Result<Arc<RgbImage>> {
        match source {
            PixelSource::Memory(img) => Ok(Arc::clone(img)),
            PixelSource::File(path) => {
                if let Some(img) = self.images.get(path) {
                    return Ok(Arc::clone(img));
                }
                let img = source.load()?;
                self.images.insert(path.clone(), Arc::clone(&img));
                Ok(img)
            }
        }
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }
}

/// Aligned reference/distorted patch pairs for one optimisation step.
///
/// Slots are grouped: group `g` owns slots `g * duplication .. (g + 1) *
/// duplication`, all cut from the same image pair.
#[derive(Debug, Clone)]
pub struct TrainingBatch {
    /// NHWC, `[0, 1]`, one 64×64×3 block per slot.
    pub reference: Vec<f32>,
    pub distorted: Vec<f32>,
    /// Pixel `(y, x)` of each slot's top-left corner, shared by both images.
    pub coords: Vec<(usize, usize)>,
    /// Group (image) index of each slot.
    pub group: Vec<usize>,
    /// Per-group normalized DMOS label.
    pub dmos: Vec<f64>,
    /// Per-group distorted image id.
    pub image_ids: Vec<String>,
    pub duplication: usize,
}

impl TrainingBatch {
    pub fn slots(&self) -> usize {
        self.coords.len()
    }

    pub fn groups(&self) -> usize {
        self.dmos.len()
    }
}

/// Epoch-wise sampler over the training references of a split.
///
/// Batch composition and patch positions depend only on
/// `(seed, epoch, batch index)`, so batches can be rebuilt in any order.
#[derive(Debug, Clone)]
pub struct BatchSampler {
    train: Vec<usize>,
    pub batch_pairs: usize,
    pub duplication: usize,
    pub seed: u64,
}

impl BatchSampler {
    pub fn new(
        split: &SplitSpec,
        manifest: &DatabaseManifest,
        batch_pairs: usize,
        duplication: usize,
        seed: u64,
    ) -> Result<Self> {
        if batch_pairs == 0 || duplication == 0 {
            return Err(Error::Config(
                "batch_pairs and duplication must be positive".into(),
            ));
        }
        let train: Vec<usize> = manifest
            .records_for(&split.train_refs)
            .map(|(i, _)| i)
            .collect();
        if train.is_empty() {
            return Err(Error::Size("split has no training images".into()));
        }
        Ok(BatchSampler {
            train,
            batch_pairs,
            duplication,
            seed,
        })
    }

    pub fn train_records(&self) -> &[usize] {
        &self.train
    }

    /// Record indices of each batch in `epoch`; the last batch may be short.
    pub fn epoch_plan(&self, epoch: u64) -> Vec<Vec<usize>> {
        let mut order = self.train.clone();
        order.shuffle(&mut seed::rng(self.seed, Stream::Patches, &[epoch]));
        order.chunks(self.batch_pairs).map(<[usize]>::to_vec).collect()
    }

    pub fn materialize(
        &self,
        manifest: &DatabaseManifest,
        records: &[usize],
        epoch: u64,
        batch_index: u64,
        cache: &mut ImageCache,
    ) -> Result<TrainingBatch> {
        let mut rng = seed::rng(self.seed, Stream::Patches, &[epoch, batch_index + 1]);
        let n = records.len() * self.duplication;
        let mut batch = TrainingBatch {
            reference: Vec::with_capacity(n * PATCH_SIZE * PATCH_SIZE * 3),
            distorted: Vec::with_capacity(n * PATCH_SIZE * PATCH_SIZE * 3),
            coords: Vec::with_capacity(n),
            group: Vec::with_capacity(n),
            dmos: Vec::with_capacity(records.len()),
            image_ids: Vec::with_capacity(records.len()),
            duplication: self.duplication,
        };
        for (g, &idx) in records.iter().enumerate() {
            let rec = &manifest.records[idx];
            let dist = cache.load(&rec.pixel_source)?;
            let reference = cache.load(manifest.reference_source(&rec.reference_id)?)?;
            if dist.dimensions() != reference.dimensions() {
                return Err(Error::Alignment(format!(
                    "{} is {:?} but its reference {} is {:?}",
                    rec.image_id,
                    dist.dimensions(),
                    rec.reference_id,
                    reference.dimensions()
                )));
            }
            let (w, h) = (dist.width() as usize, dist.height() as usize);
            if w < PATCH_SIZE || h < PATCH_SIZE {
                return Err(Error::Size(format!("{} is {w}x{h}, below one patch", rec.image_id)));
            }
            for _ in 0..self.duplication {
                let y = rng.random_range(0..=h - PATCH_SIZE);
                let x = rng.random_range(0..=w - PATCH_SIZE);
                Patch::cut(&reference, y, x)?.extend_normalized(&mut batch.reference);
                Patch::cut(&dist, y, x)?.extend_normalized(&mut batch.distorted);
                batch.coords.push((y, x));
                batch.group.push(g);
            }
            batch.dmos.push(rec.dmos);
            batch.image_ids.push(rec.image_id.clone());
        }
        Ok(batch)
    }
}

/// First batch of epoch 0 for the given split.
pub fn make_training_batch(
    split: &SplitSpec,
    manifest: &DatabaseManifest,
    batch_pairs: usize,
    duplication: usize,
    seed: u64,
) -> Result<TrainingBatch> {
    let sampler = BatchSampler::new(split, manifest, batch_pairs, duplication, seed)?;
    let plan = sampler.epoch_plan(0);
    sampler.materialize(manifest, &plan[0], 0, 0, &mut ImageCache::new())
}
