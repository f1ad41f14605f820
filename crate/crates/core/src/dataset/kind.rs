use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The IQA databases the toolkit knows how to ingest.
///
/// `Synthetic` is the procedurally generated toy set produced by
/// [`crate::dataset::synth`]; its pseudo-DMOS is already on the common scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatabaseKind {
    Tid2013,
    Live,
    Csiq,
    Kadid10k,
    Synthetic,
}

/// Native subjective-score scale of a database.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreScale {
    pub min: f64,
    pub max: f64,
    /// MOS databases rate better images higher; DMOS databases the opposite.
    pub higher_is_better: bool,
}

const TID2013_TYPES: [&str; 24] = [
    "awgn",
    "awgn_color",
    "spatial_corr_noise",
    "masked_noise",
    "hf_noise",
    "impulse_noise",
    "quantization_noise",
    "gaussian_blur",
    "denoising",
    "jpeg",
    "jpeg2000",
    "jpeg_trans_error",
    "jpeg2000_trans_error",
    "non_ecc_pattern_noise",
    "local_block_distortion",
    "mean_shift",
    "contrast_change",
    "color_saturation",
    "multiplicative_noise",
    "comfort_noise",
    "noisy_compression",
    "color_quantization_dither",
    "chromatic_aberration",
    "sparse_sampling",
];

const LIVE_TYPES: [&str; 5] = ["jp2k", "jpeg", "wn", "gblur", "fastfading"];

const CSIQ_TYPES: [&str; 6] = ["awgn", "jpeg", "jpeg2000", "fnoise", "blur", "contrast"];

const KADID_TYPES: [&str; 25] = [
    "gaussian_blur",
    "lens_blur",
    "motion_blur",
    "color_diffusion",
    "color_shift",
    "color_quantization",
    "desaturation",
    "oversaturation",
    "jpeg2000",
    "jpeg",
    "white_noise",
    "white_noise_color",
    "impulse_noise",
    "multiplicative_noise",
    "denoise",
    "brighten",
    "darken",
    "mean_shift",
    "jitter",
    "non_ecc_patch",
    "pixelate",
    "quantization",
    "color_block",
    "high_sharpen",
    "contrast_change",
];

const SYNTHETIC_TYPES: [&str; 3] = ["blur", "noise", "jpeg"];

impl DatabaseKind {
    pub const ALL: [DatabaseKind; 5] = [
        DatabaseKind::Tid2013,
        DatabaseKind::Live,
        DatabaseKind::Csiq,
        DatabaseKind::Kadid10k,
        DatabaseKind::Synthetic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DatabaseKind::Tid2013 => "TID2013",
            DatabaseKind::Live => "LIVE",
            DatabaseKind::Csiq => "CSIQ",
            DatabaseKind::Kadid10k => "KADID10K",
            DatabaseKind::Synthetic => "SYNTHETIC",
        }
    }

    pub fn score_scale(self) -> ScoreScale {
        match self {
            DatabaseKind::Live | DatabaseKind::Synthetic => ScoreScale {
                min: 0.0,
                max: 100.0,
                higher_is_better: false,
            },
            DatabaseKind::Csiq => ScoreScale {
                min: 0.0,
                max: 1.0,
                higher_is_better: false,
            },
            DatabaseKind::Tid2013 => ScoreScale {
                min: 0.0,
                max: 9.0,
                higher_is_better: true,
            },
            DatabaseKind::Kadid10k => ScoreScale {
                min: 1.0,
                max: 5.0,
                higher_is_better: true,
            },
        }
    }

    /// Distortion-type vocabulary, in the database's own numbering order.
    pub fn distortion_types(self) -> &'static [&'static str] {
        match self {
            DatabaseKind::Tid2013 => &TID2013_TYPES,
            DatabaseKind::Live => &LIVE_TYPES,
            DatabaseKind::Csiq => &CSIQ_TYPES,
            DatabaseKind::Kadid10k => &KADID_TYPES,
            DatabaseKind::Synthetic => &SYNTHETIC_TYPES,
        }
    }

    pub fn is_known_distortion(self, name: &str) -> bool {
        self.distortion_types().contains(&name)
    }

    /// Expected `(references, distorted records)` after exclusions, when the
    /// database has a published size.
    pub fn expected_counts(self) -> Option<(usize, usize)> {
        match self {
            DatabaseKind::Tid2013 => Some((24, 2880)),
            DatabaseKind::Live => Some((29, 982)),
            DatabaseKind::Csiq => Some((30, 866)),
            DatabaseKind::Kadid10k => Some((81, 10_125)),
            DatabaseKind::Synthetic => None,
        }
    }
}

impl fmt::Display for DatabaseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DatabaseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "tid2013" | "tid" => Ok(DatabaseKind::Tid2013),
            "live" => Ok(DatabaseKind::Live),
            "csiq" => Ok(DatabaseKind::Csiq),
            "kadid10k" | "kadid" => Ok(DatabaseKind::Kadid10k),
            "synthetic" | "toy" => Ok(DatabaseKind::Synthetic),
            _ => Err(Error::Usage(format!(
                "unknown database kind `{s}` (expected one of tid2013, live, csiq, kadid10k, synthetic)"
            ))),
        }
    }
}
