//! Checkpoint container: a safetensors file holding every named parameter
//! (`param/<name>`) and Adam moment (`adam_m/<name>`, `adam_v/<name>`), with
//! string metadata carrying the format version, network configuration,
//! variant, epoch, seeds and per-parameter Adam step counts.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use candle_core::{DType, Tensor};
use safetensors::tensor::{Dtype, SafeTensors, TensorView};

use super::adam::Adam;
use crate::error::{Error, Result};
use crate::model::{QualityModel, Variant};
use crate::nets::NetConfig;
use crate::tensor::DEVICE;

pub const FORMAT_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointMeta {
    pub database: String,
    /// Completed epochs.
    pub epoch: u64,
    pub split_seed: u64,
    pub root_seed: u64,
}

pub struct LoadedCheckpoint {
    pub meta: CheckpointMeta,
    pub model: QualityModel,
    /// Moments and step counts, keyed by parameter name.
    pub adam: BTreeMap<String, (Tensor, Tensor, u64)>,
}

fn ck<E: std::fmt::Display>(path: &Path) -> impl Fn(E) -> Error + '_ {
    move |e| Error::Checkpoint(format!("{}: {e}", path.display()))
}

fn tensor_bytes(t: &Tensor) -> Result<(Vec<usize>, Vec<u8>)> {
    let v = t.to_dtype(DType::F32)?.flatten_all()?.to_vec1::<f32>()?;
    Ok((t.dims().to_vec(), v.iter().flat_map(|x| x.to_le_bytes()).collect()))
}

fn view_tensor(view: &TensorView<'_>) -> Result<Tensor> {
    if view.dtype() != Dtype::F32 {
        return Err(Error::Checkpoint(format!("unexpected tensor dtype {:?}", view.dtype())));
    }
    let data: Vec<f32> = view
        .data()
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    Ok(Tensor::from_vec(data, view.shape(), &DEVICE)?)
}

pub fn save_checkpoint(path: &Path, model: &QualityModel, adam: Option<&Adam>, meta: &CheckpointMeta) -> Result<()> {
    let named = model.named_vars();
    let mut blobs: Vec<(String, Vec<usize>, Vec<u8>)> = Vec::new();
    let mut steps = BTreeMap::new();
    for (i, (name, var)) in named.iter().enumerate() {
        let (shape, bytes) = tensor_bytes(var.as_tensor())?;
        blobs.push((format!("param/{name}"), shape, bytes));
        if let Some(opt) = adam {
            let (s, b) = tensor_bytes(&opt.m[i])?;
            blobs.push((format!("adam_m/{name}"), s, b));
            let (s, b) = tensor_bytes(&opt.v[i])?;
            blobs.push((format!("adam_v/{name}"), s, b));
            steps.insert(name.clone(), opt.steps[i]);
        }
    }
    let views = blobs
        .iter()
        .map(|(n, s, b)| Ok((n.clone(), TensorView::new(Dtype::F32, s.clone(), b).map_err(ck(path))?)))
        .collect::<Result<Vec<_>>>()?;
    let mut info = HashMap::new();
    info.insert("format_version".into(), FORMAT_VERSION.into());
    info.insert("net_config".into(), serde_json::to_string(&model.config).map_err(ck(path))?);
    info.insert("variant".into(), serde_json::to_string(&model.variant).map_err(ck(path))?);
    info.insert("database".into(), meta.database.clone());
    info.insert("epoch".into(), meta.epoch.to_string());
    info.insert("split_seed".into(), meta.split_seed.to_string());
    info.insert("root_seed".into(), meta.root_seed.to_string());
    if adam.is_some() {
        info.insert("adam_steps".into(), serde_json::to_string(&steps).map_err(ck(path))?);
    }
    let bytes = safetensors::serialize(views, Some(info)).map_err(ck(path))?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn meta_field<'a>(info: &'a HashMap<String, String>, key: &str, path: &Path) -> Result<&'a String> {
    info.get(key)
        .ok_or_else(|| Error::Checkpoint(format!("{}: metadata lacks `{key}`", path.display())))
}

fn meta_u64(info: &HashMap<String, String>, key: &str, path: &Path) -> Result<u64> {
    meta_field(info, key, path)?.parse().map_err(ck(path))
}

pub fn load_checkpoint(path: &Path) -> Result<LoadedCheckpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let (_, header) = SafeTensors::read_metadata(&bytes).map_err(ck(path))?;
    let info = header
        .metadata()
        .clone()
        .ok_or_else(|| Error::Checkpoint(format!("{}: no metadata", path.display())))?;
    let version = meta_field(&info, "format_version", path)?;
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "{}: format version {version}, expected {FORMAT_VERSION}",
            path.display()
        )));
    }
    let config: NetConfig = serde_json::from_str(meta_field(&info, "net_config", path)?).map_err(ck(path))?;
    let variant: Variant = serde_json::from_str(meta_field(&info, "variant", path)?).map_err(ck(path))?;
    let meta = CheckpointMeta {
        database: meta_field(&info, "database", path)?.clone(),
        epoch: meta_u64(&info, "epoch", path)?,
        split_seed: meta_u64(&info, "split_seed", path)?,
        root_seed: meta_u64(&info, "root_seed", path)?,
    };
    let steps: BTreeMap<String, u64> = match info.get("adam_steps") {
        Some(s) => serde_json::from_str(s).map_err(ck(path))?,
        None => BTreeMap::new(),
    };
    let st = SafeTensors::deserialize(&bytes).map_err(ck(path))?;
    let model = QualityModel::new(&config, variant, meta.root_seed)?;
    let named = model.named_vars();
    let expected: std::collections::BTreeSet<String> = named.iter().map(|(n, _)| format!("param/{n}")).collect();
    if let Some(extra) = st.names().into_iter().find(|n| n.starts_with("param/") && !expected.contains(*n)) {
        return Err(Error::Checkpoint(format!("{}: unexpected tensor {extra}", path.display())));
    }
    let mut adam = BTreeMap::new();
    for (name, var) in &named {
        let view = st
            .tensor(&format!("param/{name}"))
            .map_err(|_| Error::Checkpoint(format!("{}: missing parameter {name}", path.display())))?;
        if view.shape() != var.dims() {
            return Err(Error::Checkpoint(format!(
                "{}: parameter {name} has shape {:?}, model expects {:?}",
                path.display(),
                view.shape(),
                var.dims()
            )));
        }
        var.set(&view_tensor(&view)?.to_dtype(var.dtype())?)?;
        if let (Ok(m), Ok(v), Some(s)) = (
            st.tensor(&format!("adam_m/{name}")),
            st.tensor(&format!("adam_v/{name}")),
            steps.get(name),
        ) {
            adam.insert(name.clone(), (view_tensor(&m)?, view_tensor(&v)?, *s));
        }
    }
    Ok(LoadedCheckpoint { meta, model, adam })
}

/// Loads a checkpoint and rejects it unless it was written with `expected`.
pub fn load_checkpoint_expecting(path: &Path, expected: &NetConfig) -> Result<LoadedCheckpoint> {
    let ck = load_checkpoint(path)?;
    if &ck.model.config != expected {
        return Err(Error::Checkpoint(format!(
            "{}: network configuration {:?} does not match the requested {:?}",
            path.display(),
            ck.model.config,
            expected
        )));
    }
    Ok(ck)
}

impl LoadedCheckpoint {
    /// Optimizer over the restored model with the saved moments.
    pub fn optimizer(&self, lr: f64, weight_decay: f64, max_grad_norm: Option<f64>) -> Result<Adam> {
        let named = self.model.named_vars();
        let mut opt = Adam::new(named.iter().map(|(_, v)| v.clone()).collect(), lr, weight_decay, max_grad_norm)?;
        for (i, (name, _)) in named.iter().enumerate() {
            if let Some((m, v, s)) = self.adam.get(name) {
                opt.m[i] = m.clone();
                opt.v[i] = v.clone();
                opt.steps[i] = *s;
            }
        }
        Ok(opt)
    }
}
