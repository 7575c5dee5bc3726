use std::path::Path;

use nsum::ard::{self, SizesFile};
use nsum::{ArdSurvey, NsumError};
use serde_json::json;

use crate::args::SurveyArgs;
use crate::manifest::Run;
use crate::Failure;

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

/// Parses a survey without checking its invariants. The format follows the
/// file extension; CSV needs the sizes file.
pub fn read_survey_unchecked(run: &mut Run, args: &SurveyArgs) -> Result<ArdSurvey, Failure> {
    let text = run.input("survey", &args.survey)?;
    if is_json(&args.survey) {
        return serde_json::from_str(&text)
            .map_err(|e| Failure::data(format!("{}: {e}", args.survey.display())));
    }
    let sizes_path = args
        .sizes
        .as_deref()
        .ok_or_else(|| Failure::usage("a CSV survey needs --sizes"))?;
    let sizes_text = run.input("sizes", sizes_path)?;
    let sizes: SizesFile =
        serde_json::from_str(&sizes_text).map_err(|e| Failure::data(format!("{}: {e}", sizes_path.display())))?;
    Ok(ard::parse_survey_csv(&text, &sizes)?)
}

/// Parses and validates a survey; violations fail with the full report.
pub fn read_survey(run: &mut Run, args: &SurveyArgs) -> Result<ArdSurvey, Failure> {
    let survey = read_survey_unchecked(run, args)?;
    let report = ard::validate(&survey);
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if !report.is_ok() {
        return Err(NsumError::Validation(report).into());
    }
    Ok(survey)
}

/// Resolves the target column: the named one, or the only unknown column.
pub fn target_column(survey: &ArdSurvey, unknown: Option<&str>) -> Result<usize, Failure> {
    match unknown {
        Some(name) => Ok(survey.unknown_index(name)?),
        None => match survey.unknown_columns.iter().collect::<Vec<_>>().as_slice() {
            [k] => Ok(**k),
            [] => Err(Failure::data("survey has no unknown column")),
            _ => Err(Failure::usage("survey has several unknown columns; choose one with --unknown")),
        },
    }
}

pub fn record_survey_flags(run: &mut Run, args: &SurveyArgs) {
    run.flag("survey_format", if is_json(&args.survey) { "json" } else { "csv" });
}

pub fn validate(args: &SurveyArgs, seed: u64, out: Option<&Path>) -> Result<(), Failure> {
    let mut run = Run::new("validate", seed, out);
    record_survey_flags(&mut run, args);
    let survey = read_survey_unchecked(&mut run, args)?;
    let report = ard::validate(&survey);
    let digest = run.digest();
    let value = json!({
        "ok": report.is_ok(),
        "respondents": survey.n_respondents(),
        "columns": survey.n_columns(),
        "report": report,
        "manifest": digest,
    });
    run.write_json("validation.json", &value)?;
    eprintln!(
        "{} respondents, {} columns: {} violations, {} warnings",
        survey.n_respondents(),
        survey.n_columns(),
        report.violations.len(),
        report.warnings.len()
    );
    for v in &report.violations {
        eprintln!("violation: {v}");
    }
    let ok = report.is_ok();
    run.finish(&value)?;
    if ok {
        Ok(())
    } else {
        Err(Failure::data("survey failed validation"))
    }
}

pub fn summarize(args: &SurveyArgs, seed: u64, out: Option<&Path>) -> Result<(), Failure> {
    let mut run = Run::new("summarize", seed, out);
    record_survey_flags(&mut run, args);
    let survey = read_survey(&mut run, args)?;
    let digest = run.digest();
    let columns = ard::summarize(&survey);
    for c in &columns {
        eprintln!(
            "{:<16} mean {:>10.4} var {:>12.4} zeros {:>6.3}",
            c.column, c.mean, c.variance, c.zero_proportion
        );
    }
    let value = json!({
        "respondents": survey.n_respondents(),
        "population_total": survey.population_total,
        "columns": columns,
        "manifest": digest,
    });
    run.write_json("summary.json", &value)?;
    run.finish(&value)
}
