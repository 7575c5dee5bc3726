//! Aggregated relational data: the respondent-by-subpopulation count matrix
//! and the metadata every estimator needs alongside it.
//!
//! Counts are stored as integers with an explicit missing marker. Estimators
//! promote them to reals and skip missing cells.

mod enriched;
mod estimate;
mod io;
mod summary;
mod validate;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{NsumError, Result};

pub use enriched::{load_enriched, parse_enriched, render_enriched, save_enriched, EnrichedArd};
pub use estimate::{DegreeEstimates, EstimateMetadata, SizeEstimate};
pub use io::{
    load_survey, load_survey_csv, load_survey_json, parse_survey_csv, render_survey_csv, save_survey_csv,
    save_survey_json, sizes_of, SizesFile, SurveyFormat,
};
pub use summary::{summarize, ColumnSummary};
pub use validate::{validate, ValidationReport, Violation};

/// Respondent-level covariates, stored row-major (`n × p`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Covariates {
    pub names: Vec<String>,
    pub values: Vec<f64>,
}

impl Covariates {
    pub fn width(&self) -> usize {
        self.names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.width();
        &self.values[i * p..(i + 1) * p]
    }

    /// Covariates with each column shifted to mean zero.
    pub fn column_centered(&self) -> Covariates {
        let p = self.width();
        if p == 0 {
            return self.clone();
        }
        let n = self.values.len() / p;
        let mut means = vec![0.0; p];
        for i in 0..n {
            for j in 0..p {
                means[j] += self.values[i * p + j];
            }
        }
        for m in &mut means {
            *m /= n.max(1) as f64;
        }
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(idx, v)| v - means[idx % p])
            .collect();
        Covariates {
            names: self.names.clone(),
            values,
        }
    }
}

/// Per-respondent Likert answers about one subpopulation, with the scale's
/// upper bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikertColumn {
    pub upper: f64,
    pub values: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArdSurvey {
    pub respondent_ids: Vec<String>,
    pub columns: Vec<String>,
    /// Row-major `n × K`; `None` marks item nonresponse.
    pub responses: Vec<Option<u32>>,
    pub population_total: u64,
    pub known_sizes: BTreeMap<usize, u64>,
    pub unknown_columns: BTreeSet<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariates: Option<Covariates>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub likert: BTreeMap<usize, LikertColumn>,
}

impl ArdSurvey {
    /// Builds a survey with generated respondent ids and no missing cells.
    /// The result is not validated.
    pub fn from_counts(
        columns: Vec<String>,
        rows: &[Vec<u32>],
        population_total: u64,
        known_sizes: BTreeMap<usize, u64>,
        unknown_columns: BTreeSet<usize>,
    ) -> Self {
        let respondent_ids = (0..rows.len()).map(|i| format!("r{}", i + 1)).collect();
        let responses = rows.iter().flat_map(|r| r.iter().map(|&y| Some(y))).collect();
        ArdSurvey {
            respondent_ids,
            columns,
            responses,
            population_total,
            known_sizes,
            unknown_columns,
            weights: None,
            covariates: None,
            likert: BTreeMap::new(),
        }
    }

    pub fn n_respondents(&self) -> usize {
        self.respondent_ids.len()
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    #[inline]
    pub fn get(&self, i: usize, k: usize) -> Option<u32> {
        self.responses[i * self.columns.len() + k]
    }

    pub fn row(&self, i: usize) -> &[Option<u32>] {
        let k = self.columns.len();
        &self.responses[i * k..(i + 1) * k]
    }

    pub fn column(&self, k: usize) -> impl Iterator<Item = Option<u32>> + '_ {
        (0..self.n_respondents()).map(move |i| self.get(i, k))
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Resolves a column name that must be one of the unknown subpopulations.
    pub fn unknown_index(&self, name: &str) -> Result<usize> {
        match self.column_index(name) {
            Some(k) if self.unknown_columns.contains(&k) => Ok(k),
            _ => Err(NsumError::NotUnknown(name.to_string())),
        }
    }

    pub fn ensure_unknown(&self, k: usize) -> Result<()> {
        if self.unknown_columns.contains(&k) {
            Ok(())
        } else {
            let name = self.columns.get(k).cloned().unwrap_or_else(|| format!("#{k}"));
            Err(NsumError::NotUnknown(name))
        }
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w[i])
    }

    /// Copy in which known column `k` is treated as unknown.
    pub fn with_column_hidden(&self, k: usize) -> ArdSurvey {
        let mut out = self.clone();
        if out.known_sizes.remove(&k).is_some() {
            out.unknown_columns.insert(k);
        }
        out
    }

    /// Copy with column `k` removed entirely; indices above `k` shift down.
    pub fn without_column(&self, k: usize) -> ArdSurvey {
        let width = self.n_columns();
        let shift = |c: usize| if c > k { c - 1 } else { c };
        let responses = self
            .responses
            .iter()
            .enumerate()
            .filter(|(idx, _)| idx % width != k)
            .map(|(_, v)| *v)
            .collect();
        let mut columns = self.columns.clone();
        columns.remove(k);
        ArdSurvey {
            respondent_ids: self.respondent_ids.clone(),
            columns,
            responses,
            population_total: self.population_total,
            known_sizes: self
                .known_sizes
                .iter()
                .filter(|(&c, _)| c != k)
                .map(|(&c, &s)| (shift(c), s))
                .collect(),
            unknown_columns: self
                .unknown_columns
                .iter()
                .filter(|&&c| c != k)
                .map(|&c| shift(c))
                .collect(),
            weights: self.weights.clone(),
            covariates: self.covariates.clone(),
            likert: self
                .likert
                .iter()
                .filter(|(&c, _)| c != k)
                .map(|(&c, l)| (shift(c), l.clone()))
                .collect(),
        }
    }

    /// Copy restricted to the given respondent rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> ArdSurvey {
        let width = self.n_columns();
        let mut out = self.clone();
        out.respondent_ids = rows.iter().map(|&i| self.respondent_ids[i].clone()).collect();
        out.responses = rows
            .iter()
            .flat_map(|&i| self.responses[i * width..(i + 1) * width].iter().copied())
            .collect();
        out.weights = self.weights.as_ref().map(|w| rows.iter().map(|&i| w[i]).collect());
        out.covariates = self.covariates.as_ref().map(|c| Covariates {
            names: c.names.clone(),
            values: rows.iter().flat_map(|&i| c.row(i).iter().copied()).collect(),
        });
        for l in out.likert.values_mut() {
            l.values = rows.iter().map(|&i| l.values[i]).collect();
        }
        out
    }
}
