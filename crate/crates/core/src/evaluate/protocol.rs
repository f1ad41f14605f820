use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use super::metrics::median;
use super::predict::{predict_records, Mode};
use super::report::EvalReport;
use crate::dataset::{split_by_reference, DatabaseManifest, ImageCache, SplitSpec, DEFAULT_RATIOS};
use crate::error::{Error, Result};
use crate::model::{QualityModel, Variant};
use crate::nets::NetConfig;
use crate::trainer::{fit, load_checkpoint, FitOutcome, TrainConfig};

/// Scores the test references of `split` with `model`.
pub fn evaluate_split(
    model: &QualityModel,
    manifest: &DatabaseManifest,
    split: &SplitSpec,
    mode: Mode,
) -> Result<EvalReport> {
    let idx: Vec<usize> = manifest.records_for(&split.test_refs).map(|(i, _)| i).collect();
    if idx.is_empty() {
        return Err(Error::Size("split has no test images".into()));
    }
    let preds = predict_records(model, manifest, idx, mode, &mut ImageCache::new())?;
    EvalReport::from_predictions(manifest.kind, "test", split.seed, &preds)
}

#[derive(Debug, Clone)]
pub struct SplitRun {
    pub split: SplitSpec,
    pub fit: FitOutcome,
    /// Test report of the best-validation checkpoint.
    pub best: EvalReport,
    /// Test report of the final-epoch checkpoint.
    pub last: EvalReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntraSummary {
    pub reports: Vec<EvalReport>,
    pub median_srcc: f64,
    pub median_plcc: f64,
}

/// Median over the per-split reports; with an even count, the mean of the
/// two middle values.
pub fn summarize(reports: Vec<EvalReport>) -> Result<IntraSummary> {
    let s: Vec<f64> = reports.iter().map(|r| r.srcc).collect();
    let p: Vec<f64> = reports.iter().map(|r| r.plcc).collect();
    Ok(IntraSummary {
        median_srcc: median(&s)?,
        median_plcc: median(&p)?,
        reports,
    })
}

fn checkpoint_model(path: &Path) -> Result<QualityModel> {
    Ok(load_checkpoint(path)?.model)
}

/// Trains and tests on split seeds `0..n_splits`, each run under
/// `out_dir/split-{seed}`. The summary covers the best-validation models.
pub fn intra_eval(
    config: &TrainConfig,
    net: &NetConfig,
    variant: Variant,
    manifest: &DatabaseManifest,
    n_splits: u64,
    out_dir: &Path,
) -> Result<(IntraSummary, Vec<SplitRun>)> {
    if n_splits == 0 {
        return Err(Error::Config("n_splits must be at least 1".into()));
    }
    let mut runs = Vec::new();
    for seed in 0..n_splits {
        let split = split_by_reference(manifest, DEFAULT_RATIOS, seed)?;
        let dir = out_dir.join(format!("split-{seed}"));
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        split.save(&dir.join("split.txt"), manifest.kind)?;
        let outcome = fit(config, net, variant, manifest, &split, &dir)?;
        let best = evaluate_split(&checkpoint_model(&outcome.best_checkpoint)?, manifest, &split, Mode::NoReference)?;
        let last = evaluate_split(&checkpoint_model(&outcome.final_checkpoint)?, manifest, &split, Mode::NoReference)?;
        log::info!("split {seed}: test SRCC {:.4} (best) {:.4} (final)", best.srcc, last.srcc);
        runs.push(SplitRun {
            split,
            fit: outcome,
            best,
            last,
        });
    }
    let summary = summarize(runs.iter().map(|r| r.best.clone()).collect())?;
    Ok((summary, runs))
}

#[derive(Debug, Clone)]
pub struct CrossEvalOutcome {
    pub fit: FitOutcome,
    /// One `full` report per test database, in argument order.
    pub reports: Vec<EvalReport>,
}

fn training_files(manifest: &DatabaseManifest, split: &SplitSpec) -> BTreeSet<PathBuf> {
    let refs: BTreeSet<String> = split.train_refs.union(&split.val_refs).cloned().collect();
    let mut files: BTreeSet<PathBuf> = manifest
        .records_for(&refs)
        .filter_map(|(_, r)| r.pixel_source.path().map(Path::to_path_buf))
        .collect();
    for r in &refs {
        if let Some(p) = manifest.references.get(r).and_then(|s| s.path()) {
            files.insert(p.to_path_buf());
        }
    }
    files
}

/// Trains once on the 60/20 train/val portion of `train_db` (the test
/// portion is left unused) and scores every image of each test database in
/// no-reference mode against that database's own normalized DMOS.
pub fn cross_eval(
    config: &TrainConfig,
    net: &NetConfig,
    variant: Variant,
    train_db: &DatabaseManifest,
    test_dbs: &[DatabaseManifest],
    split_seed: u64,
    out_dir: &Path,
) -> Result<CrossEvalOutcome> {
    if test_dbs.is_empty() {
        return Err(Error::Config("cross evaluation needs at least one test database".into()));
    }
    let seen = training_files(train_db, &split_by_reference(train_db, DEFAULT_RATIOS, split_seed)?);
    for db in test_dbs {
        if db.kind == train_db.kind {
            return Err(Error::Config(format!("{} is both the training and a test database", db.kind)));
        }
        let overlap = db
            .records
            .iter()
            .filter(|r| r.pixel_source.path().is_some_and(|p| seen.contains(p)))
            .count();
        if overlap > 0 {
            return Err(Error::Integrity(format!(
                "{overlap} image(s) of {} were also used to train on {}",
                db.kind, train_db.kind
            )));
        }
    }
    let mut split = split_by_reference(train_db, DEFAULT_RATIOS, split_seed)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    split.save(&out_dir.join("split.txt"), train_db.kind)?;
    split.test_refs.clear();
    let outcome = fit(config, net, variant, train_db, &split, out_dir)?;
    let model = checkpoint_model(&outcome.best_checkpoint)?;
    let mut reports = Vec::new();
    for db in test_dbs {
        let nr = db.without_references();
        let preds = predict_records(&model, &nr, 0..nr.records.len(), Mode::NoReference, &mut ImageCache::new())?;
        reports.push(EvalReport::from_predictions(db.kind, "full", split_seed, &preds)?);
    }
    Ok(CrossEvalOutcome { fit: outcome, reports })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::DatabaseKind;
    use std::collections::BTreeMap;

    fn stub(seed: u64, v: f64) -> EvalReport {
        EvalReport {
            database: DatabaseKind::Synthetic,
            split: "test".into(),
            split_seed: seed,
            srcc: v,
            plcc: v,
            n_images: 2,
            per_distortion: BTreeMap::new(),
        }
    }

    #[test]
    fn median_of_ten_split_values() {
        let reports: Vec<EvalReport> = (0..10).map(|i| stub(i, (10 - i) as f64 / 10.0)).collect();
        let s = summarize(reports).unwrap();
        assert!((s.median_srcc - 0.55).abs() < 1e-12);
        assert!((s.median_plcc - 0.55).abs() < 1e-12);
        let seeds: BTreeSet<u64> = s.reports.iter().map(|r| r.split_seed).collect();
        assert_eq!(seeds.len(), 10);
    }
}
