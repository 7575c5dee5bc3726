//! File formats for surveys.
//!
//! The CSV form is a header `respondent_id,<subpop_1>,...,<subpop_K>` with one
//! row per respondent and empty fields for missing answers, paired with a
//! sizes JSON file:
//!
//! ```json
//! {"population_total": 1000, "known": {"a": 100}, "unknown": ["u"]}
//! ```
//!
//! Three optional column families may follow the subpopulation columns:
//! `weight`, `likert:<subpop>` (bounds go in the sizes file under
//! `likert_upper`), and `cov:<name>`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{validate, ArdSurvey, Covariates, LikertColumn};
use crate::error::{NsumError, Result};

const ID_COLUMN: &str = "respondent_id";
const WEIGHT_COLUMN: &str = "weight";
const LIKERT_PREFIX: &str = "likert:";
const COVARIATE_PREFIX: &str = "cov:";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurveyFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizesFile {
    pub population_total: u64,
    pub known: BTreeMap<String, u64>,
    #[serde(default)]
    pub unknown: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub likert_upper: BTreeMap<String, f64>,
}

/// Loads and validates a survey. CSV input needs the companion sizes file.
pub fn load_survey(path: &Path, format: SurveyFormat, sizes: Option<&Path>) -> Result<ArdSurvey> {
    match format {
        SurveyFormat::Json => load_survey_json(path),
        SurveyFormat::Csv => {
            let sizes = sizes.ok_or_else(|| NsumError::Format("CSV surveys need a sizes JSON file".into()))?;
            load_survey_csv(path, sizes)
        }
    }
}

pub fn load_survey_csv(survey_path: &Path, sizes_path: &Path) -> Result<ArdSurvey> {
    let text = fs::read_to_string(survey_path).map_err(|e| NsumError::io(survey_path, e))?;
    let sizes_text = fs::read_to_string(sizes_path).map_err(|e| NsumError::io(sizes_path, e))?;
    let sizes: SizesFile = serde_json::from_str(&sizes_text)?;
    let survey = parse_survey_csv(&text, &sizes)?;
    checked(survey)
}

pub fn load_survey_json(path: &Path) -> Result<ArdSurvey> {
    let text = fs::read_to_string(path).map_err(|e| NsumError::io(path, e))?;
    let survey: ArdSurvey = serde_json::from_str(&text)?;
    checked(survey)
}

fn checked(survey: ArdSurvey) -> Result<ArdSurvey> {
    let report = validate(&survey);
    if report.is_ok() {
        Ok(survey)
    } else {
        Err(NsumError::Validation(report))
    }
}

pub fn save_survey_csv(survey: &ArdSurvey, survey_path: &Path, sizes_path: &Path) -> Result<()> {
    let (csv_text, sizes) = render_survey_csv(survey)?;
    fs::write(survey_path, csv_text).map_err(|e| NsumError::io(survey_path, e))?;
    let sizes_text = serde_json::to_string_pretty(&sizes)? + "\n";
    fs::write(sizes_path, sizes_text).map_err(|e| NsumError::io(sizes_path, e))
}

pub fn save_survey_json(survey: &ArdSurvey, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(survey)? + "\n";
    fs::write(path, text).map_err(|e| NsumError::io(path, e))
}

pub fn sizes_of(survey: &ArdSurvey) -> SizesFile {
    SizesFile {
        population_total: survey.population_total,
        known: survey
            .known_sizes
            .iter()
            .map(|(&k, &s)| (survey.columns[k].clone(), s))
            .collect(),
        unknown: survey.unknown_columns.iter().map(|&k| survey.columns[k].clone()).collect(),
        likert_upper: survey
            .likert
            .iter()
            .map(|(&k, l)| (survey.columns[k].clone(), l.upper))
            .collect(),
    }
}

pub fn render_survey_csv(survey: &ArdSurvey) -> Result<(String, SizesFile)> {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    let mut header = vec![ID_COLUMN.to_string()];
    header.extend(survey.columns.iter().cloned());
    if survey.weights.is_some() {
        header.push(WEIGHT_COLUMN.into());
    }
    for &k in survey.likert.keys() {
        header.push(format!("{LIKERT_PREFIX}{}", survey.columns[k]));
    }
    if let Some(c) = &survey.covariates {
        header.extend(c.names.iter().map(|n| format!("{COVARIATE_PREFIX}{n}")));
    }
    w.write_record(&header).map_err(csv_error)?;

    for i in 0..survey.n_respondents() {
        let mut rec = vec![survey.respondent_ids[i].clone()];
        rec.extend(survey.row(i).iter().map(|v| v.map_or_else(String::new, |y| y.to_string())));
        if let Some(ws) = &survey.weights {
            rec.push(ws[i].to_string());
        }
        for l in survey.likert.values() {
            rec.push(l.values[i].map_or_else(String::new, |x| x.to_string()));
        }
        if let Some(c) = &survey.covariates {
            rec.extend(c.row(i).iter().map(|x| x.to_string()));
        }
        w.write_record(&rec).map_err(csv_error)?;
    }
    let bytes = w.into_inner().map_err(|e| NsumError::Format(e.to_string()))?;
    let text = String::from_utf8(bytes).map_err(|e| NsumError::Format(e.to_string()))?;
    Ok((text, sizes_of(survey)))
}

fn csv_error(e: csv::Error) -> NsumError {
    let line = e.position().map_or(0, |p| p.line());
    NsumError::Parse {
        line,
        column: 0,
        message: e.to_string(),
    }
}

enum Role {
    Subpop(usize),
    Weight,
    Likert(usize),
    Covariate(usize),
}

pub fn parse_survey_csv(text: &str, sizes: &SizesFile) -> Result<ArdSurvey> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = reader.headers().map_err(csv_error)?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(NsumError::Parse {
            line: 1,
            column: 1,
            message: "no respondent rows".into(),
        });
    }
    if &header[0] != ID_COLUMN {
        return Err(NsumError::Parse {
            line: 1,
            column: 1,
            message: format!("first column must be `{ID_COLUMN}`, found `{}`", &header[0]),
        });
    }

    let mut columns = Vec::new();
    let mut likert_names = Vec::new();
    let mut cov_names = Vec::new();
    let mut roles = Vec::new();
    let mut has_weight = false;
    for (j, name) in header.iter().enumerate().skip(1) {
        let role = if name == WEIGHT_COLUMN && !sizes.known.contains_key(name) && !sizes.unknown.iter().any(|u| u == name) {
            has_weight = true;
            Role::Weight
        } else if let Some(target) = name.strip_prefix(LIKERT_PREFIX) {
            likert_names.push(target.to_string());
            Role::Likert(likert_names.len() - 1)
        } else if let Some(cov) = name.strip_prefix(COVARIATE_PREFIX) {
            cov_names.push(cov.to_string());
            Role::Covariate(cov_names.len() - 1)
        } else {
            if columns.iter().any(|c| c == name) {
                return Err(NsumError::Parse {
                    line: 1,
                    column: j + 1,
                    message: format!("duplicate column `{name}`"),
                });
            }
            columns.push(name.to_string());
            Role::Subpop(columns.len() - 1)
        };
        roles.push(role);
    }

    for name in sizes.known.keys().chain(sizes.unknown.iter()) {
        if !columns.iter().any(|c| c == name) {
            return Err(NsumError::Format(format!(
                "sizes file names column `{name}` which is missing from the survey header"
            )));
        }
    }
    let mut known_sizes = BTreeMap::new();
    let mut unknown_columns = BTreeSet::new();
    for (k, name) in columns.iter().enumerate() {
        match (sizes.known.get(name), sizes.unknown.iter().any(|u| u == name)) {
            (Some(&s), false) => {
                known_sizes.insert(k, s);
            }
            (None, true) => {
                unknown_columns.insert(k);
            }
            (Some(_), true) => {
                return Err(NsumError::Format(format!("column `{name}` is listed as both known and unknown")));
            }
            (None, false) => {
                return Err(NsumError::Format(format!("survey column `{name}` is missing from the sizes file")));
            }
        }
    }
    let mut likert_targets = Vec::new();
    for name in &likert_names {
        let k = columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| NsumError::Format(format!("likert column refers to unknown subpopulation `{name}`")))?;
        let upper = *sizes
            .likert_upper
            .get(name)
            .ok_or_else(|| NsumError::Format(format!("no likert_upper bound for `{name}` in sizes file")))?;
        likert_targets.push((k, upper));
    }

    let mut ids = Vec::new();
    let mut responses = Vec::new();
    let mut weights = Vec::new();
    let mut likert_values: Vec<Vec<Option<f64>>> = vec![Vec::new(); likert_names.len()];
    let mut cov_values = Vec::new();

    for rec in reader.records() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != header.len() {
            return Err(NsumError::Parse {
                line,
                column: rec.len().min(header.len()) + 1,
                message: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
        ids.push(rec[0].to_string());
        let mut cov_row = vec![0.0; cov_names.len()];
        let mut row = vec![None; columns.len()];
        for (j, (field, role)) in rec.iter().skip(1).zip(&roles).enumerate() {
            let field = field.trim();
            let column = j + 2;
            let bad = |what: &str| NsumError::Parse {
                line,
                column,
                message: format!("invalid {what} `{field}`"),
            };
            match role {
                Role::Subpop(k) => {
                    if !field.is_empty() {
                        row[*k] = Some(field.parse::<u32>().map_err(|_| bad("count"))?);
                    }
                }
                Role::Weight => weights.push(field.parse::<f64>().map_err(|_| bad("weight"))?),
                Role::Likert(l) => likert_values[*l].push(if field.is_empty() {
                    None
                } else {
                    Some(field.parse::<f64>().map_err(|_| bad("likert response"))?)
                }),
                Role::Covariate(c) => cov_row[*c] = field.parse::<f64>().map_err(|_| bad("covariate"))?,
            }
        }
        responses.extend(row);
        cov_values.extend(cov_row);
    }
    if ids.is_empty() {
        return Err(NsumError::Parse {
            line: 2,
            column: 1,
            message: "no respondent rows".into(),
        });
    }

    Ok(ArdSurvey {
        respondent_ids: ids,
        columns,
        responses,
        population_total: sizes.population_total,
        known_sizes,
        unknown_columns,
        weights: has_weight.then_some(weights),
        covariates: (!cov_names.is_empty()).then_some(Covariates {
            names: cov_names,
            values: cov_values,
        }),
        likert: likert_targets
            .into_iter()
            .zip(likert_values)
            .map(|((k, upper), values)| (k, LikertColumn { upper, values }))
            .collect(),
    })
}
