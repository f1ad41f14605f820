//! Correlation metrics, no-reference prediction, the intra- and
//! cross-database protocols, per-distortion reports and t-SNE export.

mod metrics;
mod predict;
mod protocol;
mod report;
mod tsne;

pub use metrics::{average_ranks, median, plcc, srcc};
pub use predict::{image_patches, predict_image, predict_image_fr, predict_records, Mode, Prediction, Predictor};
pub use protocol::{
    cross_eval, evaluate_split, intra_eval, summarize, CrossEvalOutcome, IntraSummary, SplitRun,
};
pub use report::{reports_to_csv, write_reports, DistortionScore, EvalReport, REPORT_HEADER};
pub use tsne::{sample_pairs, tsne_export, TsneConfig, TsneExport, ROLES};

use crate::error::{Error, Result};

/// SRCC and PLCC of a prediction set, `None` where a correlation is undefined.
pub fn srcc_plcc_defined(predictions: &[Prediction]) -> Result<(Option<f64>, Option<f64>)> {
    let pred: Vec<f64> = predictions.iter().map(|p| p.score).collect();
    let label: Vec<f64> = predictions.iter().map(|p| p.dmos).collect();
    let keep = |r: Result<f64>| match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::UndefinedCorrelation(_)) => Ok(None),
        Err(e) => Err(e),
    };
    Ok((keep(srcc(&pred, &label))?, keep(plcc(&pred, &label))?))
}
