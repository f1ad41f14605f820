//! JSON-lines training log: one `header` record per (re)start, one `epoch`
//! record per completed epoch and a closing `summary`.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{LossBreakdown, SelectionSet, Trainer};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based count of completed epochs.
    pub epoch: u64,
    /// Sums over the epoch's batches.
    pub losses: LossBreakdown,
    pub selection: Option<SelectionSet>,
    pub val_srcc: Option<f64>,
    pub val_plcc: Option<f64>,
    /// File name of the checkpoint written at this epoch, if any.
    pub checkpoint: Option<String>,
    pub wall_time_s: f64,
}

pub struct TrainLog {
    path: PathBuf,
    file: File,
}

impl TrainLog {
    /// Opens the log, appending when resuming and truncating otherwise.
    pub fn open(path: &Path, append: bool) -> Result<Self> {
        let file = OpenOptions::new()
            .create(true)
            .write(true)
            .append(append)
            .truncate(!append)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        Ok(TrainLog {
            path: path.to_path_buf(),
            file,
        })
    }

    fn write(&mut self, value: serde_json::Value) -> Result<()> {
        writeln!(self.file, "{value}")
            .and_then(|_| self.file.flush())
            .map_err(|e| Error::io(&self.path, e))
    }

    pub fn header(&mut self, trainer: &Trainer<'_>, resumed_from: Option<&Path>) -> Result<()> {
        let (train, val, test) = trainer.split.counts();
        self.write(json!({
            "record": "header",
            "database": trainer.manifest.kind.name(),
            "seed": trainer.config.seed,
            "split_seed": trainer.split.seed,
            "split_references": {"train": train, "val": val, "test": test},
            "variant": trainer.model.variant,
            "train": trainer.config,
            "net": trainer.model.config,
            "start_epoch": trainer.epoch,
            "resumed_from": resumed_from.map(|p| p.display().to_string()),
        }))
    }

    pub fn epoch(&mut self, record: &EpochRecord) -> Result<()> {
        let mut v = serde_json::to_value(record).map_err(|e| Error::Config(e.to_string()))?;
        v["record"] = json!("epoch");
        self.write(v)
    }

    pub fn summary(
        &mut self,
        best_epoch: u64,
        best_srcc: Option<f64>,
        best: &Path,
        last: &Path,
        selection: SelectionSet,
    ) -> Result<()> {
        self.write(json!({
            "record": "summary",
            "best_epoch": best_epoch,
            "best_srcc": best_srcc,
            "best_checkpoint": best.file_name().map(|n| n.to_string_lossy().to_string()),
            "final_checkpoint": last.file_name().map(|n| n.to_string_lossy().to_string()),
            "selection": selection,
        }))
    }
}

/// Every `epoch` record of a log, in file order.
pub fn read_epoch_records(path: &Path) -> Result<Vec<EpochRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let v: serde_json::Value = serde_json::from_str(&line)
            .map_err(|e| Error::Ingestion(format!("{}: {e}", path.display())))?;
        if v["record"] == "epoch" {
            out.push(
                serde_json::from_value(v)
                    .map_err(|e| Error::Ingestion(format!("{}: {e}", path.display())))?,
            );
        }
    }
    Ok(out)
}
