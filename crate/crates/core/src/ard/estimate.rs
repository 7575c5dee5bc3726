use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeEstimates {
    pub degrees: Vec<f64>,
    pub method_tag: String,
}

impl DegreeEstimates {
    pub fn total(&self) -> f64 {
        self.degrees.iter().sum()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EstimateMetadata {
    #[serde(default)]
    pub excluded_respondents: usize,
    #[serde(default)]
    pub decisions: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unknown: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub population_total: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<String>,
}

/// A size estimate for one hidden subpopulation.
///
/// Serialized as `{method, point, se, ci: [lo, hi], calibrations_applied, metadata}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeEstimate {
    pub method: String,
    pub point: f64,
    #[serde(rename = "se", default)]
    pub std_error: Option<f64>,
    #[serde(rename = "ci", default)]
    pub interval: Option<(f64, f64)>,
    #[serde(default)]
    pub calibrations_applied: Vec<String>,
    #[serde(default)]
    pub metadata: EstimateMetadata,
}

impl SizeEstimate {
    pub fn new(method: impl Into<String>, point: f64) -> Self {
        SizeEstimate {
            method: method.into(),
            point,
            std_error: None,
            interval: None,
            calibrations_applied: Vec::new(),
            metadata: EstimateMetadata::default(),
        }
    }

    pub fn covers(&self, truth: f64) -> Option<bool> {
        self.interval.map(|(lo, hi)| lo <= truth && truth <= hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_shape_uses_short_names() {
        let mut e = SizeEstimate::new("mle", 30.0);
        e.std_error = Some(10.0);
        e.interval = Some((10.4, 49.6));
        let v = serde_json::to_value(&e).unwrap();
        assert_eq!(v["se"], 10.0);
        assert_eq!(v["ci"][1], 49.6);
        assert_eq!(v["metadata"]["excluded_respondents"], 0);
        let back: SizeEstimate = serde_json::from_value(v).unwrap();
        assert_eq!(back, e);
    }
}
