use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::metrics::{plcc, srcc};
use super::predict::Prediction;
use crate::dataset::DatabaseKind;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistortionScore {
    /// `None` when the subset has fewer than two images or a constant vector.
    pub srcc: Option<f64>,
    pub plcc: Option<f64>,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub database: DatabaseKind,
    /// Label of the evaluated split, e.g. `test` or `full`.
    pub split: String,
    pub split_seed: u64,
    pub srcc: f64,
    pub plcc: f64,
    pub n_images: usize,
    /// Keyed by distortion type, iterated in the database's vocabulary order
    /// via [`EvalReport::distortion_rows`].
    pub per_distortion: BTreeMap<String, DistortionScore>,
}

fn defined(r: Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::UndefinedCorrelation(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

impl EvalReport {
    pub fn from_predictions(
        database: DatabaseKind,
        split: &str,
        split_seed: u64,
        predictions: &[Prediction],
    ) -> Result<Self> {
        let pred: Vec<f64> = predictions.iter().map(|p| p.score).collect();
        let label: Vec<f64> = predictions.iter().map(|p| p.dmos).collect();
        let mut groups: BTreeMap<String, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
        for p in predictions {
            if !database.is_known_distortion(&p.distortion_type) {
                return Err(Error::Integrity(format!(
                    "{} has distortion type {:?}, unknown to {database}",
                    p.image_id, p.distortion_type
                )));
            }
            let g = groups.entry(p.distortion_type.clone()).or_default();
            g.0.push(p.score);
            g.1.push(p.dmos);
        }
        let mut per_distortion = BTreeMap::new();
        for (k, (p, l)) in groups {
            per_distortion.insert(
                k,
                DistortionScore {
                    srcc: defined(srcc(&p, &l))?,
                    plcc: defined(plcc(&p, &l))?,
                    n: p.len(),
                },
            );
        }
        Ok(EvalReport {
            database,
            split: split.to_string(),
            split_seed,
            srcc: srcc(&pred, &label)?,
            plcc: plcc(&pred, &label)?,
            n_images: predictions.len(),
            per_distortion,
        })
    }

    /// Observed distortion types in vocabulary order.
    pub fn distortion_rows(&self) -> Vec<(&str, &DistortionScore)> {
        self.database
            .distortion_types()
            .iter()
            .filter_map(|t| self.per_distortion.get_key_value(*t).map(|(k, v)| (k.as_str(), v)))
            .collect()
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".to_string(), |x| x.to_string())
}

pub const REPORT_HEADER: &str = "split,database,distortion_type,srcc,plcc,n";

/// One row per observed distortion type plus an `ALL` row, per report.
pub fn reports_to_csv(reports: &[EvalReport]) -> String {
    let mut s = String::new();
    writeln!(s, "{REPORT_HEADER}").unwrap();
    for r in reports {
        let split = format!("{}-{}", r.split, r.split_seed);
        for (t, d) in r.distortion_rows() {
            writeln!(s, "{split},{},{t},{},{},{}", r.database, fmt_opt(d.srcc), fmt_opt(d.plcc), d.n).unwrap();
        }
        writeln!(s, "{split},{},ALL,{},{},{}", r.database, r.srcc, r.plcc, r.n_images).unwrap();
    }
    s
}

pub fn write_reports(reports: &[EvalReport], path: &Path) -> Result<()> {
    std::fs::write(path, reports_to_csv(reports)).map_err(|e| Error::io(path, e))
}
