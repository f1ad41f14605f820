//! Mapping of database-native subjective scores onto a common DMOS scale.
//!
//! Every database is mapped linearly onto `[0, 100]` with a uniform
//! orientation: higher DMOS means worse quality. MOS databases are flipped,
//! `dmos = (max - raw) / (max - min) * 100`.

use super::DatabaseKind;
use crate::error::{Error, Result};

pub fn normalize_score(raw: f64, kind: DatabaseKind) -> Result<f64> {
    let scale = kind.score_scale();
    if !raw.is_finite() || raw < scale.min || raw > scale.max {
        return Err(Error::Range(format!(
            "{kind} score {raw} outside nominal range [{}, {}]",
            scale.min, scale.max
        )));
    }
    let span = scale.max - scale.min;
    let unit = if scale.higher_is_better {
        (scale.max - raw) / span
    } else {
        (raw - scale.min) / span
    };
    Ok(unit * 100.0)
}
