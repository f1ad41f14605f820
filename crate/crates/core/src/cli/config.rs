//! Flat TOML run configuration. Unknown keys are rejected; every key not
//! given falls back to the published training settings. Command-line
//! overrides are merged into the parsed table before it is deserialized, so
//! flags win over the file and the file wins over defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::aggregate::AggregationKind;
use crate::dataset::{
    load_manifest_with, split_by_reference, DatabaseKind, DatabaseManifest, LoadOptions, SplitSpec, DEFAULT_RATIOS,
};
use crate::error::{Error, Result};
use crate::evaluate::TsneConfig;
use crate::model::Variant;
use crate::nets::NetConfig;
use crate::trainer::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// 60/20/20 reference-disjoint train/val/test.
    Standard,
    /// Every reference in training; selection falls back to training SRCC.
    TrainOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub database: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data_root: Option<PathBuf>,
    /// Relocates reference images; only full-reference paths read it.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_dir: Option<PathBuf>,
    pub split: SplitMode,
    pub split_seed: u64,
    pub n_splits: u64,

    pub pseudo_reference: bool,
    pub invertible: bool,
    pub triplet: bool,
    pub aggregation: AggregationKind,

    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_pairs: usize,
    pub duplication: usize,
    pub max_epochs: u64,
    pub lambda: f64,
    pub margin_alpha: f64,
    pub seed: u64,
    pub eval_every: u64,
    pub grad_clip: f64,

    pub feature_dim: usize,
    pub conv_channels: Vec<usize>,
    pub inn_blocks: usize,
    pub inn_subnet_width: usize,
    pub inn_clamp: f64,
    pub gru_hidden: usize,
    pub quality_bias_init: f64,

    pub tsne_pairs: usize,
    pub tsne_perplexity: f32,
    pub tsne_epochs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        let n = NetConfig::default();
        let v = Variant::FULL;
        let s = TsneConfig::default();
        RunConfig {
            database: None,
            data_root: None,
            reference_dir: None,
            split: SplitMode::Standard,
            split_seed: 0,
            n_splits: 10,
            pseudo_reference: v.pseudo_reference,
            invertible: v.invertible,
            triplet: v.triplet,
            aggregation: v.aggregation,
            learning_rate: t.learning_rate,
            weight_decay: t.weight_decay,
            batch_pairs: t.batch_pairs,
            duplication: t.duplication,
            max_epochs: t.max_epochs,
            lambda: t.lambda,
            margin_alpha: t.margin_alpha,
            seed: t.seed,
            eval_every: t.eval_every,
            grad_clip: t.grad_clip,
            feature_dim: n.feature_dim,
            conv_channels: n.conv_channels,
            inn_blocks: n.inn_blocks,
            inn_subnet_width: n.inn_subnet_width,
            inn_clamp: n.inn_clamp,
            gru_hidden: n.gru_hidden,
            quality_bias_init: n.quality_bias_init,
            tsne_pairs: s.n_pairs,
            tsne_perplexity: s.perplexity,
            tsne_epochs: s.epochs,
        }
    }
}

/// Parses `key=value`; the value is read as a TOML literal, or as a bare
/// string when it is not one.
pub fn parse_override(s: &str) -> Result<(String, toml::Value)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::Usage(format!("override `{s}` is not key=value")))?;
    let k = k.trim().to_string();
    let v = v.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {v}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(v.to_string()));
    Ok((k, value))
}

impl RunConfig {
    pub fn from_table(table: toml::Table) -> Result<Self> {
        toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))
    }

    /// Defaults, then `path`, then `overrides` in order.
    pub fn load(path: Option<&Path>, overrides: &[(String, toml::Value)]) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                text.parse::<toml::Table>()
                    .map_err(|e| Error::Config(format!("{}: {}", p.display(), e.message())))?
            }
            None => toml::Table::new(),
        };
        for (k, v) in overrides {
            table.insert(k.clone(), v.clone());
        }
        let cfg = Self::from_table(table)?;
        cfg.train_config().validate()?;
        cfg.net_config().validate()?;
        cfg.variant().validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// Writes the effective configuration as `config.toml` under `dir`.
    pub fn echo(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("config.toml");
        std::fs::write(&path, self.to_toml()).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    pub fn database(&self) -> Result<DatabaseKind> {
        self.database
            .as_deref()
            .ok_or_else(|| Error::Config("missing config key `database`".into()))?
            .parse()
    }

    pub fn data_root(&self) -> Result<&Path> {
        self.data_root
            .as_deref()
            .ok_or_else(|| Error::Config("missing config key `data_root`".into()))
    }

    pub fn variant(&self) -> Variant {
        Variant {
            pseudo_reference: self.pseudo_reference,
            invertible: self.invertible,
            triplet: self.triplet,
            aggregation: self.aggregation,
        }
    }

    pub fn set_variant(&mut self, v: Variant) {
        self.pseudo_reference = v.pseudo_reference;
        self.invertible = v.invertible;
        self.triplet = v.triplet;
        self.aggregation = v.aggregation;
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            weight_decay: self.weight_decay,
            batch_pairs: self.batch_pairs,
            duplication: self.duplication,
            max_epochs: self.max_epochs,
            lambda: self.lambda,
            margin_alpha: self.margin_alpha,
            seed: self.seed,
            eval_every: self.eval_every,
            grad_clip: self.grad_clip,
        }
    }

    pub fn net_config(&self) -> NetConfig {
        NetConfig {
            feature_dim: self.feature_dim,
            conv_channels: self.conv_channels.clone(),
            inn_blocks: self.inn_blocks,
            inn_subnet_width: self.inn_subnet_width,
            inn_clamp: self.inn_clamp,
            gru_hidden: self.gru_hidden,
            quality_bias_init: self.quality_bias_init,
        }
    }

    pub fn tsne_config(&self) -> TsneConfig {
        TsneConfig {
            n_pairs: self.tsne_pairs,
            perplexity: self.tsne_perplexity,
            epochs: self.tsne_epochs,
            seed: self.seed,
        }
    }

    /// Training manifest: references must be present, at `reference_dir` when set.
    pub fn training_manifest(&self) -> Result<DatabaseManifest> {
        let kind = self.database()?;
        let m = load_manifest_with(self.data_root()?, kind, LoadOptions::no_reference())?;
        let m = match &self.reference_dir {
            Some(dir) => m.with_reference_dir(dir),
            None => m,
        };
        m.validate(LoadOptions::default())?;
        Ok(m)
    }

    pub fn split_spec(&self, manifest: &DatabaseManifest) -> Result<SplitSpec> {
        match self.split {
            SplitMode::Standard => split_by_reference(manifest, DEFAULT_RATIOS, self.split_seed),
            SplitMode::TrainOnly => Ok(SplitSpec::train_only(manifest.reference_ids(), self.split_seed)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_the_training_defaults() {
        let c = RunConfig::default();
        assert_eq!(c.train_config(), TrainConfig::default());
        assert_eq!(c.net_config(), NetConfig::default());
        assert_eq!(c.variant(), Variant::FULL);
    }

    #[test]
    fn unknown_and_missing_keys_are_named() {
        let mut t = toml::Table::new();
        t.insert("learning_rat".into(), toml::Value::Float(0.1));
        let e = RunConfig::from_table(t).unwrap_err().to_string();
        assert!(e.contains("learning_rat"), "{e}");
        let e = RunConfig::default().database().unwrap_err().to_string();
        assert!(e.contains("`database`"), "{e}");
        let e = RunConfig::default().data_root().unwrap_err().to_string();
        assert!(e.contains("`data_root`"), "{e}");
    }

    #[test]
    fn flags_override_file_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("run.toml");
        std::fs::write(&file, "database = \"live\"\ndata_root = \"/data/live\"\nseed = 3\nmax_epochs = 7\n").unwrap();
        let ov = vec![parse_override("seed=11").unwrap(), parse_override("aggregation=mean").unwrap()];
        let c = RunConfig::load(Some(&file), &ov).unwrap();
        assert_eq!((c.seed, c.max_epochs), (11, 7));
        assert_eq!(c.aggregation, AggregationKind::Mean);
        assert_eq!(c.database().unwrap(), DatabaseKind::Live);
        let echoed = c.echo(dir.path()).unwrap();
        assert_eq!(RunConfig::load(Some(&echoed), &[]).unwrap(), c);
    }
}
