use serde::{Deserialize, Serialize};

use crate::ard::SizeEstimate;
use crate::error::{NsumError, Result};

/// Fraction of a respondent's network aware of a hidden member's status.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisibilityFactor {
    pub value: f64,
    pub source: String,
}

impl VisibilityFactor {
    pub fn new(value: f64, source: impl Into<String>) -> Result<Self> {
        if !(value > 0.0 && value <= 1.0) {
            return Err(NsumError::InvalidInput(format!("visibility factor {value} outside (0, 1]")));
        }
        Ok(VisibilityFactor {
            value,
            source: source.into(),
        })
    }
}

/// Divides point, standard error and interval by the visibility factor.
pub fn scale_by_visibility(estimate: &SizeEstimate, tau: &VisibilityFactor) -> Result<SizeEstimate> {
    if !(tau.value > 0.0) {
        return Err(NsumError::ZeroVisibility);
    }
    if tau.value > 1.0 {
        return Err(NsumError::InvalidInput(format!("visibility factor {} exceeds 1", tau.value)));
    }
    let v = tau.value;
    let mut out = estimate.clone();
    out.point /= v;
    out.std_error = out.std_error.map(|s| s / v);
    out.interval = out.interval.map(|(lo, hi)| (lo / v, hi / v));
    out.calibrations_applied.push(format!("visibility:{v}:{}", tau.source));
    Ok(out)
}
