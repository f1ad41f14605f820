//! Joint optimisation of every submodule under the single total loss, with
//! per-epoch validation, best-checkpoint retention and a JSONL log.

mod adam;
mod checkpoint;
mod log;

pub use adam::Adam;
pub use checkpoint::{
    load_checkpoint, load_checkpoint_expecting, save_checkpoint, CheckpointMeta, LoadedCheckpoint, FORMAT_VERSION,
};
pub use log::{read_epoch_records, EpochRecord, TrainLog};

use std::path::{Path, PathBuf};
use std::time::Instant;

use candle_core::Tensor;
use serde::{Deserialize, Serialize};

use crate::dataset::{BatchSampler, DatabaseManifest, ImageCache, LoadOptions, SplitSpec, TrainingBatch};
use crate::error::{Error, Result};
use crate::evaluate::{predict_records, srcc_plcc_defined, Mode};
use crate::model::{labels, QualityModel, Variant};
use crate::nets::{patch_tensor, NetConfig};
use crate::objective::{mae_sum_tensor, triplet_loss_tensor, LossConfig};
use crate::tensor::scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_pairs: usize,
    pub duplication: usize,
    pub max_epochs: u64,
    pub lambda: f64,
    pub margin_alpha: f64,
    /// Root seed for weight init and patch sampling.
    pub seed: u64,
    pub eval_every: u64,
    /// Global gradient-norm ceiling; 0 disables clipping.
    pub grad_clip: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            weight_decay: 1e-4,
            batch_pairs: 32,
            duplication: 16,
            max_epochs: 1000,
            lambda: 20.0,
            margin_alpha: 2.0,
            seed: 0,
            eval_every: 1,
            grad_clip: 10.0,
        }
    }
}

impl TrainConfig {
    pub fn loss(&self) -> LossConfig {
        LossConfig {
            lambda: self.lambda,
            margin_alpha: self.margin_alpha,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.loss().validate()?;
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning_rate must be non-negative, got {}", self.learning_rate)));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::Config(format!("weight_decay must be non-negative, got {}", self.weight_decay)));
        }
        if self.batch_pairs == 0 || self.duplication == 0 {
            return Err(Error::Config("batch_pairs and duplication must be positive".into()));
        }
        if self.eval_every == 0 {
            return Err(Error::Config("eval_every must be at least 1".into()));
        }
        if !(self.grad_clip >= 0.0) {
            return Err(Error::Config(format!("grad_clip must be non-negative, got {}", self.grad_clip)));
        }
        Ok(())
    }

    fn clip(&self) -> Option<f64> {
        (self.grad_clip > 0.0).then_some(self.grad_clip)
    }
}

/// Loss terms of one step or, summed, of one epoch.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub regression_fr: f64,
    pub regression_pr: f64,
    pub regression_nr: f64,
    pub triplet: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn accumulate(&mut self, other: &LossBreakdown) {
        self.regression_fr += other.regression_fr;
        self.regression_pr += other.regression_pr;
        self.regression_nr += other.regression_nr;
        self.triplet += other.triplet;
        self.total += other.total;
    }
}

/// Batch tensors `(reference, distorted)`.
pub fn batch_tensors(batch: &TrainingBatch) -> Result<(Tensor, Tensor)> {
    let dtype = candle_core::DType::F32;
    Ok((patch_tensor(batch.reference.clone(), dtype)?, patch_tensor(batch.distorted.clone(), dtype)?))
}

/// Differentiable total loss of one batch with its breakdown.
pub fn compute_loss(model: &QualityModel, batch: &TrainingBatch, loss: &LossConfig) -> Result<(Tensor, LossBreakdown)> {
    let (reference, distorted) = batch_tensors(batch)?;
    let out = model.forward_train(&reference, &distorted, batch.groups())?;
    let y = labels(&batch.dmos)?;
    let reg_nr = mae_sum_tensor(&out.q_nr, &y)?;
    let mut total = reg_nr.clone();
    let mut parts = LossBreakdown {
        regression_nr: scalar(&reg_nr)?,
        ..LossBreakdown::default()
    };
    if let (Some(q_fr), Some(q_pr)) = (&out.q_fr, &out.q_pr) {
        let reg_fr = mae_sum_tensor(q_fr, &y)?;
        let reg_pr = mae_sum_tensor(q_pr, &y)?;
        parts.regression_fr = scalar(&reg_fr)?;
        parts.regression_pr = scalar(&reg_pr)?;
        total = ((total + reg_fr)? + reg_pr)?;
    }
    if model.variant.triplet && loss.lambda != 0.0 {
        let (Some(f_r), Some(f_pr), Some(f_d), Some(f_pd)) = (&out.f_r, &out.f_pr, &out.f_d, &out.f_pd) else {
            return Err(Error::Config("triplet loss needs the pseudo-reference branch".into()));
        };
        let trip = triplet_loss_tensor(f_r, f_pr, f_d, f_pd, loss.margin_alpha)?;
        parts.triplet = scalar(&trip)?;
        total = (total + (trip * loss.lambda)?)?;
    }
    parts.total = scalar(&total)?;
    if !parts.total.is_finite() {
        return Err(Error::Numeric(format!(
            "loss {:?} on batch of images [{}]",
            parts,
            batch.image_ids.join(", ")
        )));
    }
    Ok((total, parts))
}

/// One optimizer update from the batch's total loss.
pub fn train_step(model: &QualityModel, opt: &mut Adam, batch: &TrainingBatch, loss: &LossConfig) -> Result<LossBreakdown> {
    let (total, parts) = compute_loss(model, batch, loss)?;
    let grads = total.backward()?;
    opt.step(&grads)?;
    Ok(parts)
}

/// Index of the first maximum among defined scores.
pub fn select_best(scores: &[Option<f64>]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores.iter().enumerate() {
        if let Some(v) = s {
            if best.is_none_or(|(_, b)| *v > b) {
                best = Some((i, *v));
            }
        }
    }
    best.map(|(i, _)| i)
}

/// Where the model-selection score came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionSet {
    Validation,
    /// The split has no validation references, so the training images are
    /// scored instead.
    Training,
}

pub struct Trainer<'m> {
    pub config: TrainConfig,
    pub model: QualityModel,
    pub opt: Adam,
    pub manifest: &'m DatabaseManifest,
    pub split: SplitSpec,
    sampler: BatchSampler,
    cache: ImageCache,
    /// Completed epochs.
    pub epoch: u64,
}

impl<'m> Trainer<'m> {
    pub fn new(
        config: &TrainConfig,
        net: &NetConfig,
        variant: Variant,
        manifest: &'m DatabaseManifest,
        split: &SplitSpec,
    ) -> Result<Self> {
        config.validate()?;
        let model = QualityModel::new(net, variant, config.seed)?;
        let opt = Adam::new(model.vars(), config.learning_rate, config.weight_decay, config.clip())?;
        Self::assemble(config, model, opt, manifest, split, 0)
    }

    /// Continues from a checkpoint, including optimizer moments and epoch.
    pub fn resume(
        path: &Path,
        config: &TrainConfig,
        manifest: &'m DatabaseManifest,
        split: &SplitSpec,
    ) -> Result<Self> {
        config.validate()?;
        let ck = load_checkpoint(path)?;
        if ck.meta.root_seed != config.seed {
            return Err(Error::Checkpoint(format!(
                "{} was trained with seed {}, configuration asks for {}",
                path.display(),
                ck.meta.root_seed,
                config.seed
            )));
        }
        let opt = ck.optimizer(config.learning_rate, config.weight_decay, config.clip())?;
        let epoch = ck.meta.epoch;
        Self::assemble(config, ck.model, opt, manifest, split, epoch)
    }

    fn assemble(
        config: &TrainConfig,
        model: QualityModel,
        opt: Adam,
        manifest: &'m DatabaseManifest,
        split: &SplitSpec,
        epoch: u64,
    ) -> Result<Self> {
        if !split.is_disjoint() {
            return Err(Error::Integrity("split reference sets overlap".into()));
        }
        manifest.validate(LoadOptions::default())?;
        let sampler = BatchSampler::new(split, manifest, config.batch_pairs, config.duplication, config.seed)?;
        Ok(Trainer {
            config: config.clone(),
            model,
            opt,
            manifest,
            split: split.clone(),
            sampler,
            cache: ImageCache::new(),
            epoch,
        })
    }

    pub fn run_epoch(&mut self) -> Result<LossBreakdown> {
        let loss = self.config.loss();
        let mut sum = LossBreakdown::default();
        for (b, records) in self.sampler.epoch_plan(self.epoch).iter().enumerate() {
            let batch = self.sampler.materialize(self.manifest, records, self.epoch, b as u64, &mut self.cache)?;
            sum.accumulate(&train_step(&self.model, &mut self.opt, &batch, &loss)?);
        }
        self.epoch += 1;
        Ok(sum)
    }

    /// No-reference SRCC/PLCC on the selection set; `None` where undefined.
    pub fn selection_scores(&mut self) -> Result<(SelectionSet, Option<f64>, Option<f64>)> {
        let (set, refs) = if self.split.val_refs.is_empty() {
            (SelectionSet::Training, &self.split.train_refs)
        } else {
            (SelectionSet::Validation, &self.split.val_refs)
        };
        let idx: Vec<usize> = self.manifest.records_for(refs).map(|(i, _)| i).collect();
        let preds = predict_records(&self.model, self.manifest, idx, Mode::NoReference, &mut self.cache)?;
        let (s, p) = srcc_plcc_defined(&preds)?;
        Ok((set, s, p))
    }

    pub fn meta(&self) -> CheckpointMeta {
        CheckpointMeta {
            database: self.manifest.kind.name().to_string(),
            epoch: self.epoch,
            split_seed: self.split.seed,
            root_seed: self.config.seed,
        }
    }

    pub fn checkpoint_name(&self) -> String {
        format!("{}_{}_{}.ckpt", self.manifest.kind.name(), self.config.seed, self.epoch)
    }

    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(self.checkpoint_name());
        save_checkpoint(&path, &self.model, Some(&self.opt), &self.meta())?;
        Ok(path)
    }
}

pub const BEST_MARKER: &str = "best.ckpt";
pub const LOG_NAME: &str = "train_log.jsonl";

#[derive(Debug, Clone, Default)]
pub struct FitOptions {
    pub resume_from: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub best_checkpoint: PathBuf,
    pub best_epoch: u64,
    pub best_srcc: Option<f64>,
    pub final_checkpoint: PathBuf,
    pub log_path: PathBuf,
    pub selection: SelectionSet,
    pub history: Vec<EpochRecord>,
}

/// Resolves the `best.ckpt` marker in `dir` to the checkpoint it names.
pub fn best_checkpoint(dir: &Path) -> Result<PathBuf> {
    let marker = dir.join(BEST_MARKER);
    let name = std::fs::read_to_string(&marker).map_err(|e| Error::io(&marker, e))?;
    Ok(dir.join(name.trim()))
}

pub fn fit(
    config: &TrainConfig,
    net: &NetConfig,
    variant: Variant,
    manifest: &DatabaseManifest,
    split: &SplitSpec,
    out_dir: &Path,
) -> Result<FitOutcome> {
    fit_with(config, net, variant, manifest, split, out_dir, &FitOptions::default())
}

pub fn fit_with(
    config: &TrainConfig,
    net: &NetConfig,
    variant: Variant,
    manifest: &DatabaseManifest,
    split: &SplitSpec,
    out_dir: &Path,
    options: &FitOptions,
) -> Result<FitOutcome> {
    let mut trainer = match &options.resume_from {
        Some(path) => Trainer::resume(path, config, manifest, split)?,
        None => Trainer::new(config, net, variant, manifest, split)?,
    };
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let log_path = out_dir.join(LOG_NAME);
    let mut log = TrainLog::open(&log_path, options.resume_from.is_some())?;
    log.header(&trainer, options.resume_from.as_deref())?;

    let mut best: Option<(f64, u64, PathBuf)> = None;
    let mut history = Vec::new();
    let mut selection = SelectionSet::Validation;
    while trainer.epoch < config.max_epochs {
        let started = Instant::now();
        let losses = trainer.run_epoch()?;
        let mut record = EpochRecord {
            epoch: trainer.epoch,
            losses,
            selection: None,
            val_srcc: None,
            val_plcc: None,
            checkpoint: None,
            wall_time_s: 0.0,
        };
        let last = trainer.epoch == config.max_epochs;
        if trainer.epoch % config.eval_every == 0 || last {
            let (set, s, p) = trainer.selection_scores()?;
            selection = set;
            record.selection = Some(set);
            record.val_srcc = s;
            record.val_plcc = p;
            let improved = match (&best, s) {
                (None, _) => true,
                (Some((b, _, _)), Some(v)) => v > *b,
                (Some(_), None) => false,
            };
            if improved {
                let path = trainer.save(out_dir)?;
                if let Some((_, _, old)) = &best {
                    if !last {
                        std::fs::remove_file(old).map_err(|e| Error::io(old, e))?;
                    }
                }
                let marker = out_dir.join(BEST_MARKER);
                let name = path.file_name().unwrap().to_string_lossy().to_string();
                std::fs::write(&marker, &name).map_err(|e| Error::io(&marker, e))?;
                record.checkpoint = Some(name);
                best = Some((s.unwrap_or(f64::NEG_INFINITY), trainer.epoch, path));
            }
        }
        record.wall_time_s = started.elapsed().as_secs_f64();
        log.epoch(&record)?;
        history.push(record);
    }
    let final_checkpoint = out_dir.join(trainer.checkpoint_name());
    if !final_checkpoint.exists() {
        trainer.save(out_dir)?;
    }
    let (best_srcc, best_epoch, best_checkpoint) = match best {
        Some((s, e, p)) => ((s > f64::NEG_INFINITY).then_some(s), e, p),
        None => {
            // Resumed at or past max_epochs: nothing new to select among.
            let marker = out_dir.join(BEST_MARKER);
            std::fs::write(&marker, trainer.checkpoint_name()).map_err(|e| Error::io(&marker, e))?;
            (None, trainer.epoch, final_checkpoint.clone())
        }
    };
    log.summary(best_epoch, best_srcc, &best_checkpoint, &final_checkpoint, selection)?;
    Ok(FitOutcome {
        best_checkpoint,
        best_epoch,
        best_srcc,
        final_checkpoint,
        log_path,
        selection,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_published_settings() {
        let c = TrainConfig::default();
        assert_eq!(c.learning_rate, 1e-4);
        assert_eq!(c.weight_decay, 1e-4);
        assert_eq!(c.batch_pairs, 32);
        assert_eq!(c.duplication, 16);
        assert_eq!(c.max_epochs, 1000);
        assert_eq!((c.lambda, c.margin_alpha), (20.0, 2.0));
        assert_eq!(c.eval_every, 1);
    }

    #[test]
    fn selection_is_first_argmax() {
        assert_eq!(select_best(&[Some(0.1), Some(0.5), Some(0.3)]), Some(1));
        assert_eq!(select_best(&[None, Some(0.2), Some(0.2)]), Some(1));
        assert_eq!(select_best(&[None, None]), None);
    }
}
