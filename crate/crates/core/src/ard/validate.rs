use std::fmt;

use serde::{Deserialize, Serialize};

use super::ArdSurvey;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub row: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub column: Option<String>,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.rule)?;
        if let Some(r) = &self.row {
            write!(f, " [row {r}]")?;
        }
        if let Some(c) = &self.column {
            write!(f, " [column {c}]")?;
        }
        write!(f, ": {}", self.detail)
    }
}

/// Outcome of [`validate`]. Only `violations` break the survey invariants;
/// `warnings` flag data that estimators can still handle (missing cells in an
/// unknown column, for instance).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub warnings: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn contains(&self, rule: &str) -> bool {
        self.violations.iter().any(|v| v.rule == rule)
    }

    fn push(&mut self, rule: &str, row: Option<String>, column: Option<String>, detail: String) {
        self.violations.push(Violation {
            rule: rule.to_string(),
            row,
            column,
            detail,
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "error: {v}")?;
        }
        for w in &self.warnings {
            writeln!(f, "warning: {w}")?;
        }
        Ok(())
    }
}

/// Checks every survey invariant and reports each breach. Never fails.
pub fn validate(survey: &ArdSurvey) -> ValidationReport {
    let mut report = ValidationReport::default();
    let n = survey.respondent_ids.len();
    let k_total = survey.columns.len();
    let big_n = survey.population_total;
    let col_name = |k: usize| survey.columns.get(k).cloned().unwrap_or_else(|| format!("#{k}"));

    if big_n == 0 {
        report.push("population total must be positive", None, None, "N = 0".into());
    }
    if survey.responses.len() != n * k_total {
        report.push(
            "response matrix shape",
            None,
            None,
            format!("expected {} cells ({n} x {k_total}), found {}", n * k_total, survey.responses.len()),
        );
        // Cell-level checks below would index out of bounds.
        return report;
    }

    let mut seen = std::collections::BTreeSet::new();
    for name in &survey.columns {
        if !seen.insert(name) {
            report.push("duplicate column name", None, Some(name.clone()), "names must be unique".into());
        }
    }

    for (&k, &size) in &survey.known_sizes {
        if k >= k_total {
            report.push("column index out of range", None, Some(format!("#{k}")), format!("{k_total} columns"));
            continue;
        }
        if size == 0 {
            report.push("known size must be > 0", None, Some(col_name(k)), "N_k = 0".into());
        }
        if size >= big_n {
            report.push(
                "known size must be < N",
                None,
                Some(col_name(k)),
                format!("N_k = {size}, N = {big_n}"),
            );
        }
        if survey.unknown_columns.contains(&k) {
            report.push("column both known and unknown", None, Some(col_name(k)), "partition violated".into());
        }
    }
    for &k in &survey.unknown_columns {
        if k >= k_total {
            report.push("column index out of range", None, Some(format!("#{k}")), format!("{k_total} columns"));
        }
    }
    for k in 0..k_total {
        if !survey.known_sizes.contains_key(&k) && !survey.unknown_columns.contains(&k) {
            report.push(
                "column neither known nor unknown",
                None,
                Some(col_name(k)),
                "partition violated".into(),
            );
        }
    }

    for i in 0..n {
        for k in 0..k_total {
            match survey.get(i, k) {
                Some(y) if u64::from(y) > big_n => report.push(
                    "response exceeds population",
                    Some(survey.respondent_ids[i].clone()),
                    Some(col_name(k)),
                    format!("y = {y}, N = {big_n}"),
                ),
                None if survey.unknown_columns.contains(&k) => report.warnings.push(Violation {
                    rule: "missing response in unknown column".into(),
                    row: Some(survey.respondent_ids[i].clone()),
                    column: Some(col_name(k)),
                    detail: "excluded from estimates for this column".into(),
                }),
                _ => {}
            }
        }
    }

    if let Some(w) = &survey.weights {
        if w.len() != n {
            report.push("weights length", None, None, format!("expected {n}, found {}", w.len()));
        }
        for (i, &wi) in w.iter().enumerate() {
            if !(wi > 0.0 && wi.is_finite()) {
                let row = survey.respondent_ids.get(i).cloned().unwrap_or_else(|| format!("#{i}"));
                report.push("weights must be strictly positive", Some(row), None, format!("w = {wi}"));
            }
        }
    }

    if let Some(c) = &survey.covariates {
        if c.values.len() != n * c.width() {
            report.push(
                "covariate matrix shape",
                None,
                None,
                format!("expected {} values, found {}", n * c.width(), c.values.len()),
            );
        } else if c.values.iter().any(|v| !v.is_finite()) {
            report.push("covariates must be finite", None, None, "non-finite value".into());
        }
    }

    for (&k, l) in &survey.likert {
        if k >= k_total {
            report.push("column index out of range", None, Some(format!("#{k}")), "likert column".into());
            continue;
        }
        if l.values.len() != n {
            report.push("likert length", None, Some(col_name(k)), format!("expected {n}, found {}", l.values.len()));
        }
        if !(l.upper.is_finite()) {
            report.push("likert upper bound must be finite", None, Some(col_name(k)), format!("{}", l.upper));
        }
        for (i, v) in l.values.iter().enumerate() {
            if let Some(x) = v {
                if !x.is_finite() || *x > l.upper {
                    let row = survey.respondent_ids.get(i).cloned().unwrap_or_else(|| format!("#{i}"));
                    report.push(
                        "likert response exceeds upper bound",
                        Some(row),
                        Some(col_name(k)),
                        format!("x = {x}, U = {}", l.upper),
                    );
                }
            }
        }
    }

    report
}
