use std::path::Path;

use nsum::ard::SizeEstimate;
use nsum::bayes::{parse_draws_csv, posterior_size, render_draws_csv, DrawsManifest, PosteriorDraws};
use nsum::calibration::{
    apply_curve_to_estimate, eiv_adjust_draws, eiv_fit, fit_calibration_curve, loo_backestimates,
    loo_bootstrap_variances, scale_by_visibility, CalibrationCurve, CurveScale, LooRow, VisibilityFactor,
};
use nsum::ArdSurvey;
use serde_json::json;

use crate::args::{CalibrateArgs, CalibrationKind, ScaleArg, SurveyArgs};
use crate::data::read_survey;
use crate::manifest::Run;
use crate::Failure;

enum Input {
    Estimate(SizeEstimate),
    Draws(PosteriorDraws),
}

fn read_input(run: &mut Run, args: &CalibrateArgs) -> Result<Input, Failure> {
    match (&args.estimate, &args.draws) {
        (Some(path), None) => {
            let text = run.input("estimate", path)?;
            let est = serde_json::from_str(&text).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
            Ok(Input::Estimate(est))
        }
        (None, Some(path)) => {
            let text = run.input("draws", path)?;
            let manifest: Option<DrawsManifest> = match &args.draws_manifest {
                Some(m) => {
                    let t = run.input("draws_manifest", m)?;
                    Some(serde_json::from_str(&t).map_err(|e| Failure::data(format!("{}: {e}", m.display())))?)
                }
                None => None,
            };
            Ok(Input::Draws(parse_draws_csv(&text, manifest.as_ref())?))
        }
        _ => Err(Failure::usage("give exactly one of --estimate and --draws")),
    }
}

fn survey_args(args: &CalibrateArgs, what: &str) -> Result<SurveyArgs, Failure> {
    let survey = args
        .survey
        .clone()
        .ok_or_else(|| Failure::usage(format!("{what} needs --survey for the leave-one-out back-estimates")))?;
    Ok(SurveyArgs {
        survey,
        sizes: args.sizes.clone(),
    })
}

fn scale_of(s: ScaleArg) -> CurveScale {
    match s {
        ScaleArg::Beta => CurveScale::Beta,
        ScaleArg::LogSize => CurveScale::LogSize,
    }
}

fn fit_curve(rows: &[LooRow], total: f64, scale: CurveScale) -> Result<CalibrationCurve, Failure> {
    let known: Vec<f64> = rows.iter().map(|r| scale.to_scale(r.known_size as f64, total)).collect();
    let recalled: Vec<f64> = rows.iter().map(|r| scale.to_scale(r.backestimate, total)).collect();
    let labels: Vec<String> = rows.iter().map(|r| r.subpop.clone()).collect();
    Ok(fit_calibration_curve(&known, &recalled, &labels, scale)?)
}

/// The single `size[..]` parameter of a draws table, or the one `--unknown` names.
fn draws_target(draws: &PosteriorDraws, unknown: Option<&str>) -> Result<String, Failure> {
    if let Some(u) = unknown {
        return Ok(u.to_string());
    }
    let sizes: Vec<&str> = draws
        .params
        .iter()
        .filter_map(|p| p.strip_prefix("size[").and_then(|r| r.strip_suffix(']')))
        .collect();
    match sizes.as_slice() {
        [one] => Ok(one.to_string()),
        [] => Err(Failure::data("draws contain no size parameter")),
        _ => Err(Failure::usage("draws contain several size parameters; choose one with --unknown")),
    }
}

fn population_total(est: &SizeEstimate, survey: Option<&ArdSurvey>) -> Result<u64, Failure> {
    est.metadata
        .population_total
        .or(survey.map(|s| s.population_total))
        .ok_or_else(|| Failure::data("estimate has no population total; pass --survey"))
}

pub fn run(args: &CalibrateArgs, seed: u64, out: Option<&Path>) -> Result<(), Failure> {
    let mut run = Run::new("calibrate", seed, out);
    run.flag("calibration", format!("{:?}", args.calibration).to_lowercase());
    run.flag_opt("tau", args.tau);
    run.flag("tau_source", &args.tau_source);
    run.flag_opt("curve_a", args.curve_a);
    run.flag_opt("curve_b", args.curve_b);
    run.flag("scale", format!("{:?}", args.scale).to_lowercase());
    run.flag("loo_method", args.loo_method.label());
    run.flag_opt("unknown", args.unknown.as_ref());
    run.flag("bootstrap", args.bootstrap);
    let input = read_input(&mut run, args)?;

    match (args.calibration, input) {
        (CalibrationKind::Visibility, Input::Estimate(est)) => {
            let tau = args.tau.ok_or_else(|| Failure::usage("visibility calibration needs --tau"))?;
            let digest = run.digest();
            let mut adjusted = scale_by_visibility(&est, &VisibilityFactor::new(tau, &args.tau_source)?)?;
            adjusted.metadata.manifest = Some(digest);
            eprintln!("{:.1} -> {:.1}", est.point, adjusted.point);
            run.write_json("estimate.json", &adjusted)?;
            run.finish(&adjusted)
        }
        (CalibrationKind::Curve, Input::Estimate(est)) => {
            let scale = scale_of(args.scale);
            let (curve, survey) = match (args.curve_a, args.curve_b) {
                (Some(a), Some(b)) => {
                    let mut c = CalibrationCurve::new(a, b)?;
                    c.scale = scale;
                    (c, None)
                }
                _ => {
                    let sa = survey_args(args, "fitting the curve")?;
                    let survey = read_survey(&mut run, &sa)?;
                    let rows = loo_backestimates(&survey, args.loo_method)?;
                    let c = fit_curve(&rows, survey.population_total as f64, scale)?;
                    eprintln!("fitted a={:.6} b={:.6} on {} columns", c.a, c.b, rows.len());
                    (c, Some(survey))
                }
            };
            let total = population_total(&est, survey.as_ref())?;
            let digest = run.digest();
            let mut adjusted = apply_curve_to_estimate(&curve, &est, total);
            adjusted.metadata.manifest = Some(digest);
            eprintln!("{:.1} -> {:.1}", est.point, adjusted.point);
            run.write_json("curve.json", &curve)?;
            run.write_json("estimate.json", &adjusted)?;
            run.finish(&adjusted)
        }
        (CalibrationKind::Eiv, Input::Draws(draws)) => {
            let sa = survey_args(args, "errors-in-variables")?;
            let survey = read_survey(&mut run, &sa)?;
            let target = draws_target(&draws, args.unknown.as_deref())?;
            let digest = run.digest();
            let rows = loo_backestimates(&survey, args.loo_method)?;
            let s2 = loo_bootstrap_variances(&survey, args.loo_method, args.bootstrap, seed)?;
            let fit = eiv_fit(&rows, &s2)?;
            eprintln!("fitted a={:.6} b={:.6} sigma_eps={:.6}", fit.a, fit.b, fit.sigma_eps);
            let adjusted = eiv_adjust_draws(&draws, &target, &fit, seed)?;
            let mut est = posterior_size(&adjusted, &target)?;
            est.method = draws.model.clone();
            est.calibrations_applied
                .push(format!("eiv:a={}:b={}:sigma_eps={}", fit.a, fit.b, fit.sigma_eps));
            est.metadata.unknown = Some(target);
            est.metadata.population_total = Some(survey.population_total);
            est.metadata.manifest = Some(digest.clone());
            run.write("draws.csv", render_draws_csv(&adjusted, |_| true).as_bytes())?;
            let config = json!({ "eiv": fit, "manifest": digest });
            run.write_json("draws.json", &DrawsManifest::of(&adjusted, Some(config)))?;
            run.write_json("estimate.json", &est)?;
            run.finish(&est)
        }
        (CalibrationKind::Eiv, Input::Estimate(_)) => Err(Failure::data(
            "errors-in-variables calibration needs posterior draws (--draws), not a point estimate",
        )),
        (kind, Input::Draws(_)) => Err(Failure::data(format!(
            "{} calibration applies to an estimate (--estimate), not to draws",
            format!("{kind:?}").to_lowercase()
        ))),
    }
}
