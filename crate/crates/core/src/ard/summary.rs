use serde::{Deserialize, Serialize};

use super::ArdSurvey;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSummary {
    pub column: String,
    pub known_size: Option<u64>,
    /// Respondents with a non-missing answer.
    pub observed: usize,
    pub mean: f64,
    /// Sample variance (denominator `observed - 1`); zero for fewer than two answers.
    pub variance: f64,
    pub zero_proportion: f64,
}

/// Per-column mean, variance and share of zero answers over observed cells.
pub fn summarize(survey: &ArdSurvey) -> Vec<ColumnSummary> {
    (0..survey.n_columns())
        .map(|k| {
            let values: Vec<f64> = survey.column(k).flatten().map(f64::from).collect();
            let m = values.len();
            let mean = if m == 0 { 0.0 } else { values.iter().sum::<f64>() / m as f64 };
            let variance = if m < 2 {
                0.0
            } else {
                values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64
            };
            let zeros = values.iter().filter(|&&v| v == 0.0).count();
            ColumnSummary {
                column: survey.columns[k].clone(),
                known_size: survey.known_sizes.get(&k).copied(),
                observed: m,
                mean,
                variance,
                zero_proportion: if m == 0 { 0.0 } else { zeros as f64 / m as f64 },
            }
        })
        .collect()
}
