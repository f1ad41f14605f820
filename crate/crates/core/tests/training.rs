//! Optimisation-loop properties on small synthetic sets: every parameter
//! learns, a fixed batch is fitted, runs are reproducible and resumable.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, BTreeSet};
use std::hash::{Hash, Hasher};

use pseudoref::dataset::synth::{generate, SyntheticSpec};
use pseudoref::dataset::{split_by_reference, BatchSampler, DatabaseManifest, ImageCache, SplitSpec, DEFAULT_RATIOS};
use pseudoref::model::{QualityModel, Variant};
use pseudoref::nets::NetConfig;
use pseudoref::trainer::{
    best_checkpoint, compute_loss, fit, fit_with, read_epoch_records, train_step, Adam, FitOptions, TrainConfig,
    BEST_MARKER,
};
use pseudoref::Error;

fn toy(references: usize, size: u32) -> DatabaseManifest {
    generate(&SyntheticSpec {
        references,
        width: size,
        height: size,
        levels: 2,
        seed: 4,
    })
    .unwrap()
}

fn small_config() -> TrainConfig {
    TrainConfig {
        batch_pairs: 6,
        duplication: 4,
        max_epochs: 4,
        seed: 13,
        ..TrainConfig::default()
    }
}

#[test]
fn gradient_reaches_every_parameter_of_every_variant() {
    let m = toy(2, 96);
    let split = SplitSpec::train_only(m.reference_ids(), 0);
    let cfg = small_config();
    let sampler = BatchSampler::new(&split, &m, 4, 4, cfg.seed).unwrap();
    let mut cache = ImageCache::new();
    for variant in Variant::ablation_rows() {
        let model = QualityModel::new(&NetConfig::compact(), variant, 1).unwrap();
        let mut opt = Adam::new(model.vars(), cfg.learning_rate, cfg.weight_decay, Some(cfg.grad_clip)).unwrap();
        let named = model.named_vars();
        let mut reached = BTreeSet::new();
        for step in 0..10u64 {
            let plan = sampler.epoch_plan(step);
            let batch = sampler.materialize(&m, &plan[0], step, 0, &mut cache).unwrap();
            let (total, _) = compute_loss(&model, &batch, &cfg.loss()).unwrap();
            let grads = total.backward().unwrap();
            for (name, var) in &named {
                if let Some(g) = grads.get(var.as_tensor()) {
                    let mass = g.abs().unwrap().sum_all().unwrap().to_scalar::<f32>().unwrap();
                    if mass > 0.0 {
                        reached.insert(name.clone());
                    }
                }
            }
            opt.step(&grads).unwrap();
        }
        let missing: Vec<&String> = named.iter().map(|(n, _)| n).filter(|n| !reached.contains(*n)).collect();
        assert!(missing.is_empty(), "{}: no gradient for {missing:?}", variant.tag());
        let prefixes: BTreeSet<&str> = named.iter().map(|(n, _)| n.split('.').next().unwrap()).collect();
        assert_eq!(prefixes, model.submodules().into_iter().collect());
    }
}

#[test]
fn fixed_batch_loss_falls_within_fifty_steps() {
    let m = toy(2, 96);
    let split = SplitSpec::train_only(m.reference_ids(), 0);
    let cfg = small_config();
    let sampler = BatchSampler::new(&split, &m, 8, 4, cfg.seed).unwrap();
    let batch = sampler.materialize(&m, &sampler.epoch_plan(0)[0], 0, 0, &mut ImageCache::new()).unwrap();
    let model = QualityModel::new(&NetConfig::compact(), Variant::FULL, 2).unwrap();
    let mut opt = Adam::new(model.vars(), cfg.learning_rate, cfg.weight_decay, Some(cfg.grad_clip)).unwrap();
    let losses: Vec<f64> = (0..50)
        .map(|_| train_step(&model, &mut opt, &batch, &cfg.loss()).unwrap().total)
        .collect();
    assert!(losses[49] < losses[0], "first {} last {}", losses[0], losses[49]);
}

fn submodule_hashes(model: &QualityModel) -> BTreeMap<String, u64> {
    let mut out: BTreeMap<String, DefaultHasher> = BTreeMap::new();
    for (name, var) in model.named_vars() {
        let h = out.entry(name.split('.').next().unwrap().to_string()).or_default();
        for v in var.as_tensor().flatten_all().unwrap().to_vec1::<f32>().unwrap() {
            v.to_bits().hash(h);
        }
    }
    out.into_iter().map(|(k, h)| (k, h.finish())).collect()
}

#[test]
fn every_submodule_moves_every_epoch() {
    let m = toy(5, 96);
    let split = split_by_reference(&m, DEFAULT_RATIOS, 0).unwrap();
    let cfg = small_config();
    let mut t = pseudoref::trainer::Trainer::new(&cfg, &NetConfig::compact(), Variant::FULL, &m, &split).unwrap();
    let mut prev = submodule_hashes(&t.model);
    assert_eq!(prev.len(), 5);
    for _ in 0..3 {
        t.run_epoch().unwrap();
        let now = submodule_hashes(&t.model);
        for (k, h) in &now {
            assert_ne!(prev[k], *h, "{k} did not change in epoch {}", t.epoch);
        }
        prev = now;
    }
}

#[test]
fn non_finite_label_loss_names_the_batch() {
    let m = toy(1, 64);
    let split = SplitSpec::train_only(m.reference_ids(), 0);
    let sampler = BatchSampler::new(&split, &m, 2, 2, 0).unwrap();
    let mut batch = sampler.materialize(&m, &sampler.epoch_plan(0)[0], 0, 0, &mut ImageCache::new()).unwrap();
    // A NaN pixel would be absorbed by ReLU; a NaN label reaches the loss.
    batch.dmos[0] = f64::NAN;
    let model = QualityModel::new(&NetConfig::compact(), Variant::FULL, 0).unwrap();
    match compute_loss(&model, &batch, &TrainConfig::default().loss()) {
        Err(Error::Numeric(msg)) => assert!(msg.contains(&batch.image_ids[0]), "{msg}"),
        other => panic!("expected a numeric error, got {:?}", other.map(|(_, b)| b)),
    }
}

fn strip_time(mut r: pseudoref::trainer::EpochRecord) -> pseudoref::trainer::EpochRecord {
    r.wall_time_s = 0.0;
    r
}

#[test]
fn runs_are_reproducible_and_resumable() {
    let m = toy(5, 96);
    let split = split_by_reference(&m, DEFAULT_RATIOS, 1).unwrap();
    let net = NetConfig::compact();
    let cfg = TrainConfig {
        max_epochs: 6,
        ..small_config()
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = fit(&cfg, &net, Variant::FULL, &m, &split, a.path()).unwrap();
    let rb = fit(&cfg, &net, Variant::FULL, &m, &split, b.path()).unwrap();
    let la: Vec<_> = read_epoch_records(&ra.log_path).unwrap().into_iter().map(strip_time).collect();
    let lb: Vec<_> = read_epoch_records(&rb.log_path).unwrap().into_iter().map(strip_time).collect();
    assert_eq!(la.len(), 6);
    assert_eq!(la, lb);

    let final_name = format!("SYNTHETIC_{}_6.ckpt", cfg.seed);
    assert_eq!(ra.final_checkpoint.file_name().unwrap().to_string_lossy(), final_name);
    assert!(ra.final_checkpoint.exists());
    assert!(a.path().join(BEST_MARKER).exists());
    assert_eq!(best_checkpoint(a.path()).unwrap(), ra.best_checkpoint);
    assert!(ra.best_checkpoint.exists());

    let c = tempfile::tempdir().unwrap();
    let half = TrainConfig { max_epochs: 3, ..cfg.clone() };
    let first = fit(&half, &net, Variant::FULL, &m, &split, c.path()).unwrap();
    let d = tempfile::tempdir().unwrap();
    let opts = FitOptions {
        resume_from: Some(first.final_checkpoint.clone()),
    };
    let resumed = fit_with(&cfg, &net, Variant::FULL, &m, &split, d.path(), &opts).unwrap();
    let lr: Vec<_> = read_epoch_records(&resumed.log_path).unwrap().into_iter().map(strip_time).collect();
    let ld: Vec<_> = read_epoch_records(&first.log_path).unwrap().into_iter().map(strip_time).collect();
    let strip_ck = |mut r: pseudoref::trainer::EpochRecord| {
        r.checkpoint = None;
        r
    };
    let stitched: Vec<_> = ld.into_iter().chain(lr).map(strip_ck).collect();
    let reference: Vec<_> = la.into_iter().map(strip_ck).collect();
    assert_eq!(stitched, reference);

    let header = std::fs::read_to_string(&ra.log_path).unwrap();
    let first_line: serde_json::Value = serde_json::from_str(header.lines().next().unwrap()).unwrap();
    assert_eq!(first_line["record"], "header");
    assert_eq!(first_line["seed"], cfg.seed);
    assert_eq!(first_line["train"]["learning_rate"], 1e-4);
}
