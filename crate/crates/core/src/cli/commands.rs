use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::config::RunConfig;
use crate::dataset::synth::{self, SyntheticSpec};
use crate::dataset::{
    load_manifest_with, CountSummary, DatabaseKind, DatabaseManifest, ImageCache, LoadOptions, SplitSpec,
};
use crate::error::{Error, Result};
use crate::evaluate::{
    cross_eval, evaluate_split, intra_eval, predict_records, srcc_plcc_defined, tsne_export, write_reports,
    EvalReport, Mode, TsneConfig, TsneExport,
};
use crate::model::{QualityModel, Variant};
use crate::trainer::{fit_with, load_checkpoint, FitOptions, FitOutcome};

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Ingests a database (or generates the synthetic one into `out/data`),
/// writes `manifest.csv` and `summary.txt`, and returns the counts.
pub fn prepare(kind: DatabaseKind, root: Option<&Path>, synthetic: Option<&SyntheticSpec>, out: &Path) -> Result<CountSummary> {
    ensure_dir(out)?;
    let root: PathBuf = match (synthetic, root) {
        (Some(spec), _) => {
            if kind != DatabaseKind::Synthetic {
                return Err(Error::Usage(format!("--generate-synthetic cannot produce {kind}")));
            }
            let dir = out.join("data");
            synth::write_to_dir(&synth::generate(spec)?, &dir)?;
            dir
        }
        (None, Some(r)) => r.to_path_buf(),
        (None, None) => return Err(Error::Usage("prepare needs --root or --generate-synthetic".into())),
    };
    let manifest = load_manifest_with(&root, kind, LoadOptions::default())?;
    manifest.write_csv(&out.join("manifest.csv"))?;
    let summary = manifest.summary();
    write_text(&out.join("summary.txt"), &format!("{summary}\n"))?;
    Ok(summary)
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub split: SplitSpec,
    pub fit: FitOutcome,
    /// Test reports of the best and final checkpoints, when the split has a test part.
    pub test: Option<(EvalReport, EvalReport)>,
}

/// Trains one model; outputs go to `out` (config echo, split, log, checkpoints, `eval.csv`).
pub fn train(cfg: &RunConfig, out: &Path, resume: Option<&Path>) -> Result<TrainSummary> {
    ensure_dir(out)?;
    let manifest = cfg.training_manifest()?;
    let split = cfg.split_spec(&manifest)?;
    cfg.echo(out)?;
    split.save(&out.join("split.txt"), manifest.kind)?;
    let options = FitOptions {
        resume_from: resume.map(Path::to_path_buf),
    };
    let outcome = fit_with(
        &cfg.train_config(),
        &cfg.net_config(),
        cfg.variant(),
        &manifest,
        &split,
        out,
        &options,
    )?;
    let test = if split.test_refs.is_empty() {
        None
    } else {
        let best = evaluate_split(&load_checkpoint(&outcome.best_checkpoint)?.model, &manifest, &split, Mode::NoReference)?;
        let mut last =
            evaluate_split(&load_checkpoint(&outcome.final_checkpoint)?.model, &manifest, &split, Mode::NoReference)?;
        last.split = "test_final".into();
        write_reports(&[best.clone(), last.clone()], &out.join("eval.csv"))?;
        Some((best, last))
    };
    Ok(TrainSummary {
        split,
        fit: outcome,
        test,
    })
}

/// The intra-database protocol over split seeds `0..n_splits`; writes
/// `intra.csv` (per-split reports) and `median.csv`.
pub fn intra(cfg: &RunConfig, out: &Path) -> Result<(f64, f64)> {
    ensure_dir(out)?;
    let manifest = cfg.training_manifest()?;
    cfg.echo(out)?;
    let (summary, _) = intra_eval(
        &cfg.train_config(),
        &cfg.net_config(),
        cfg.variant(),
        &manifest,
        cfg.n_splits,
        out,
    )?;
    write_reports(&summary.reports, &out.join("intra.csv"))?;
    write_text(
        &out.join("median.csv"),
        &format!("median_srcc,median_plcc,n_splits\n{},{},{}\n", summary.median_srcc, summary.median_plcc, summary.reports.len()),
    )?;
    Ok((summary.median_srcc, summary.median_plcc))
}

pub struct EvalRequest<'a> {
    pub checkpoint: &'a Path,
    pub database: DatabaseKind,
    pub root: &'a Path,
    /// Evaluate the test part of this split file instead of the whole database.
    pub split: Option<&'a Path>,
    pub full_reference: bool,
    pub reference_dir: Option<&'a Path>,
}

/// Scores a database with a checkpoint and writes `eval.csv`. The
/// no-reference mode loads the database with its references stripped.
pub fn evaluate(req: &EvalRequest<'_>, out: &Path) -> Result<EvalReport> {
    let manifest = match (req.full_reference, req.reference_dir) {
        (false, Some(_)) => {
            return Err(Error::Usage(
                "--reference-dir is only accepted with --fr; no-reference evaluation never reads references".into(),
            ))
        }
        (true, None) => return Err(Error::Usage("--fr needs --reference-dir".into())),
        (false, None) => load_manifest_with(req.root, req.database, LoadOptions::no_reference())?.without_references(),
        (true, Some(dir)) => {
            let m = load_manifest_with(req.root, req.database, LoadOptions::no_reference())?.with_reference_dir(dir);
            m.validate(LoadOptions::default())?;
            m
        }
    };
    let ck = load_checkpoint(req.checkpoint)?;
    let mode = if req.full_reference {
        Mode::FullReference
    } else {
        Mode::NoReference
    };
    let (label, seed, idx): (&str, u64, Vec<usize>) = match req.split {
        Some(p) => {
            let split = SplitSpec::load(p)?;
            let idx = manifest.records_for(&split.test_refs).map(|(i, _)| i).collect();
            ("test", split.seed, idx)
        }
        None => ("full", ck.meta.split_seed, (0..manifest.records.len()).collect()),
    };
    if idx.is_empty() {
        return Err(Error::Size("nothing to evaluate".into()));
    }
    let preds = predict_records(&ck.model, &manifest, idx, mode, &mut ImageCache::new())?;
    let label = if req.full_reference { format!("{label}_fr") } else { label.to_string() };
    let report = EvalReport::from_predictions(manifest.kind, &label, seed, &preds)?;
    ensure_dir(out)?;
    write_reports(std::slice::from_ref(&report), &out.join("eval.csv"))?;
    Ok(report)
}

/// Trains on the configured database and scores each `(kind, root)` test
/// database in full; writes `cross_eval.csv`.
pub fn cross(cfg: &RunConfig, tests: &[(DatabaseKind, PathBuf)], out: &Path) -> Result<Vec<EvalReport>> {
    ensure_dir(out)?;
    let train_db = cfg.training_manifest()?;
    let test_dbs = tests
        .iter()
        .map(|(k, r)| load_manifest_with(r, *k, LoadOptions::no_reference()))
        .collect::<Result<Vec<DatabaseManifest>>>()?;
    cfg.echo(out)?;
    let outcome = cross_eval(
        &cfg.train_config(),
        &cfg.net_config(),
        cfg.variant(),
        &train_db,
        &test_dbs,
        cfg.split_seed,
        out,
    )?;
    write_reports(&outcome.reports, &out.join("cross_eval.csv"))?;
    Ok(outcome.reports)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub row: usize,
    pub variant: Variant,
    /// `test`, or `train` when the split holds no test references.
    pub eval_set: &'static str,
    pub srcc: Option<f64>,
    pub plcc: Option<f64>,
}

pub const ABLATION_HEADER: &str = "row,pseudo_reference,invertible,triplet,aggregation,eval_set,srcc,plcc";

pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let f = |v: Option<f64>| v.map_or_else(|| "nan".to_string(), |x| x.to_string());
    let mut s = String::new();
    writeln!(s, "{ABLATION_HEADER}").unwrap();
    for r in rows {
        let v = &r.variant;
        writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.row,
            v.pseudo_reference,
            v.invertible,
            v.triplet,
            v.aggregation.name(),
            r.eval_set,
            f(r.srcc),
            f(r.plcc)
        )
        .unwrap();
    }
    s
}

/// Trains the six ablation configurations on one shared split and seed,
/// each under `out/row{n}`, and writes `ablation.csv` in table order.
pub fn ablate(cfg: &RunConfig, out: &Path) -> Result<Vec<AblationRow>> {
    ensure_dir(out)?;
    let manifest = cfg.training_manifest()?;
    let split = cfg.split_spec(&manifest)?;
    cfg.echo(out)?;
    split.save(&out.join("split.txt"), manifest.kind)?;
    let mut rows = Vec::new();
    for (i, variant) in Variant::ablation_rows().into_iter().enumerate() {
        let dir = out.join(format!("row{}", i + 1));
        let mut row_cfg = cfg.clone();
        row_cfg.set_variant(variant);
        ensure_dir(&dir)?;
        row_cfg.echo(&dir)?;
        log::info!("ablation row {}: {}", i + 1, variant.tag());
        let outcome = fit_with(
            &row_cfg.train_config(),
            &row_cfg.net_config(),
            variant,
            &manifest,
            &split,
            &dir,
            &FitOptions::default(),
        )?;
        let model: QualityModel = load_checkpoint(&outcome.best_checkpoint)?.model;
        let (eval_set, srcc, plcc) = if split.test_refs.is_empty() {
            let idx: Vec<usize> = manifest.records_for(&split.train_refs).map(|(i, _)| i).collect();
            let preds = predict_records(&model, &manifest, idx, Mode::NoReference, &mut ImageCache::new())?;
            let (s, p) = srcc_plcc_defined(&preds)?;
            ("train", s, p)
        } else {
            let r = evaluate_split(&model, &manifest, &split, Mode::NoReference)?;
            ("test", Some(r.srcc), Some(r.plcc))
        };
        rows.push(AblationRow {
            row: i + 1,
            variant,
            eval_set,
            srcc,
            plcc,
        });
    }
    write_text(&out.join("ablation.csv"), &ablation_csv(&rows))?;
    Ok(rows)
}

pub struct TsneRequest<'a> {
    pub checkpoint: &'a Path,
    pub database: DatabaseKind,
    pub root: &'a Path,
    pub reference_dir: Option<&'a Path>,
    pub config: TsneConfig,
}

/// Writes `tsne.csv` and `tsne.svg`.
pub fn tsne(req: &TsneRequest<'_>, out: &Path) -> Result<TsneExport> {
    let m = load_manifest_with(req.root, req.database, LoadOptions::no_reference())?;
    let m = match req.reference_dir {
        Some(d) => m.with_reference_dir(d),
        None => m,
    };
    m.validate(LoadOptions::default())?;
    let model = load_checkpoint(req.checkpoint)?.model;
    let export = tsne_export(&model, &m, &req.config)?;
    ensure_dir(out)?;
    export.write_csv(&out.join("tsne.csv"))?;
    export.write_svg(&out.join("tsne.svg"), &format!("{} features", req.database))?;
    Ok(export)
}
