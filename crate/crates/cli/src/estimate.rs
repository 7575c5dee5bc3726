use std::collections::BTreeSet;
use std::path::Path;

use nsum::ard::parse_enriched;
use nsum::bayes::{diagnostics, render_draws_csv, DrawsManifest};
use nsum::calibration::{scale_by_visibility, VisibilityFactor};
use nsum::classic::johnsen_bounds;
use nsum::method::{self, MethodOptions};
use serde_json::json;

use crate::args::{CliMethod, EstimateArgs};
use crate::data::{read_survey, record_survey_flags, target_column};
use crate::manifest::Run;
use crate::Failure;

fn is_latent(param: &str) -> bool {
    param.starts_with("d[") || param.starts_with("alpha[")
}

pub fn run(args: &EstimateArgs, seed: u64, out: Option<&Path>) -> Result<(), Failure> {
    let mut run = Run::new("estimate", seed, out);
    record_survey_flags(&mut run, &args.survey);
    run.flag("method", args.method.label());
    run.flag_opt("unknown", args.unknown.as_ref());
    run.flag_opt("frame_prob", args.frame_prob);
    run.flag_opt("tau", args.tau);
    run.flag_opt("tau_prior", args.tau_prior.map(|p| format!("{},{}", p.mean, p.dispersion)));
    run.flag_opt("rare", args.rare.as_ref().map(|r| r.join(",")));
    run.flag("all_params", args.all_params);
    run.flag("chains", args.mcmc.chains);
    run.flag("burnin", args.mcmc.burnin);
    run.flag("keep", args.mcmc.keep);

    let survey = read_survey(&mut run, &args.survey)?;
    let unknown = target_column(&survey, args.unknown.as_deref())?;
    let enriched = match &args.enriched {
        Some(path) => {
            let text = run.input("enriched", path)?;
            let e = parse_enriched(&text, survey.population_total)?;
            e.check()?;
            Some(e)
        }
        None => None,
    };
    let digest = run.digest();

    let model = match args.method {
        CliMethod::Johnsen => {
            let bracket = johnsen_bounds(&survey, unknown)?;
            eprintln!(
                "{}: between {} and {} (position {})",
                survey.columns[unknown], bracket.lower, bracket.upper, bracket.ordering_position
            );
            let value = json!({
                "method": "johnsen",
                "unknown": survey.columns[unknown],
                "bracket": bracket,
                "manifest": digest,
            });
            run.write_json("estimate.json", &value)?;
            return run.finish(&value);
        }
        CliMethod::Model(m) => m,
    };

    let mut options = MethodOptions {
        mcmc: args.mcmc.config(seed),
        transmission_prior: args.tau_prior,
        enriched,
        ..MethodOptions::default()
    };
    options.mcmc.record_latent = args.all_params;
    if let Some(p) = args.frame_prob {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Failure::usage(format!("--frame-prob {p} outside (0, 1]")));
        }
        options.frame_inclusion = Some(vec![p; survey.n_respondents()]);
    }
    if let Some(names) = &args.rare {
        let mut cols = BTreeSet::new();
        for name in names {
            let k = survey
                .column_index(name)
                .filter(|k| survey.known_sizes.contains_key(k))
                .ok_or_else(|| Failure::data(format!("--rare: {name} is not a known column")))?;
            cols.insert(k);
        }
        options.rare_columns = Some(cols);
    }

    let output = method::estimate(model, &survey, unknown, &options)?;
    let mut estimate = output.estimate;
    if let Some(t) = args.tau {
        estimate = scale_by_visibility(&estimate, &VisibilityFactor::new(t, "cli")?)?;
    }
    estimate.metadata.unknown = Some(survey.columns[unknown].clone());
    estimate.metadata.manifest = Some(digest.clone());
    for d in &estimate.metadata.decisions {
        run.decision(d.clone());
    }

    if let Some(draws) = &output.draws {
        let diag = diagnostics(draws);
        for w in &diag.warnings {
            eprintln!("warning: {w}");
        }
        if let (Some(r), Some(e)) = (diag.max_rhat(), diag.min_ess()) {
            eprintln!("max split R-hat {r:.4}, min ESS {e:.0}");
        }
        let keep = |p: &str| args.all_params || !is_latent(p);
        run.write("draws.csv", render_draws_csv(draws, keep).as_bytes())?;
        let config = json!({ "mcmc": options.mcmc, "manifest": digest });
        run.write_json("draws.json", &DrawsManifest::of(draws, Some(config)))?;
    }

    eprint!("{}: {:.1}", estimate.method, estimate.point);
    if let Some((lo, hi)) = estimate.interval {
        eprint!(" [{lo:.1}, {hi:.1}]");
    }
    eprintln!();
    run.write_json("estimate.json", &estimate)?;
    run.finish(&estimate)
}
