use std::path::Path;

use nsum::ard::render_survey_csv;
use nsum::bayes::{diagnostics, parse_draws_csv, DrawsManifest};
use nsum::calibration::{loo_backestimates, render_loo_csv, trim_stepwise};
use serde_json::json;

use crate::args::DiagnoseCommand;
use crate::data::{read_survey, record_survey_flags};
use crate::manifest::{to_json, Run};
use crate::Failure;

pub fn run(cmd: &DiagnoseCommand, seed: u64, out: Option<&Path>) -> Result<(), Failure> {
    match cmd {
        DiagnoseCommand::Loo { survey, method } => {
            let mut run = Run::new("diagnose loo", seed, out);
            record_survey_flags(&mut run, survey);
            run.flag("method", method.label());
            let s = read_survey(&mut run, survey)?;
            let digest = run.digest();
            let rows = loo_backestimates(&s, *method)?;
            for r in &rows {
                eprintln!("{:<16} {:>10} {:>14.2} log ratio {:+.4}", r.subpop, r.known_size, r.backestimate, r.log_ratio);
            }
            run.write("loo.csv", render_loo_csv(&rows).as_bytes())?;
            run.finish(&json!({ "method": method.label(), "folds": rows, "manifest": digest }))
        }
        DiagnoseCommand::Trim {
            survey,
            method,
            tolerance,
            max_removals,
        } => {
            let mut run = Run::new("diagnose trim", seed, out);
            record_survey_flags(&mut run, survey);
            run.flag("method", method.label());
            run.flag("tolerance", tolerance);
            run.flag_opt("max_removals", *max_removals);
            let s = read_survey(&mut run, survey)?;
            let digest = run.digest();
            let outcome = trim_stepwise(&s, *method, *tolerance, *max_removals)?;
            let removed = outcome.removed();
            if removed.is_empty() {
                eprintln!("nothing removed: {}", outcome.stop_reason);
            } else {
                eprintln!("removed {} ({})", removed.join(", "), outcome.stop_reason);
            }
            let log = json!({
                "method": method.label(),
                "tolerance": tolerance,
                "removed": removed,
                "rounds": outcome.rounds,
                "final_ratios": outcome.final_ratios,
                "stop_reason": outcome.stop_reason,
                "manifest": digest,
            });
            run.write_json("trim_log.json", &log)?;
            if run.has_out_dir() {
                let (csv, sizes) = render_survey_csv(outcome.trimmed())?;
                run.write("trimmed_survey.csv", csv.as_bytes())?;
                run.write("trimmed_sizes.json", to_json(&sizes)?.as_bytes())?;
            }
            run.finish(&log)
        }
        DiagnoseCommand::Chains { draws, draws_manifest } => {
            let mut run = Run::new("diagnose chains", seed, out);
            let text = run.input("draws", draws)?;
            let manifest: Option<DrawsManifest> = match draws_manifest {
                Some(m) => {
                    let t = run.input("draws_manifest", m)?;
                    Some(serde_json::from_str(&t).map_err(|e| Failure::data(format!("{}: {e}", m.display())))?)
                }
                None => None,
            };
            let digest = run.digest();
            let d = parse_draws_csv(&text, manifest.as_ref())?;
            let diag = diagnostics(&d);
            for w in &diag.warnings {
                eprintln!("warning: {w}");
            }
            match (diag.max_rhat(), diag.min_ess()) {
                (Some(r), Some(e)) => eprintln!("max split R-hat {r:.4}, min ESS {e:.0}"),
                (None, Some(e)) => eprintln!("min ESS {e:.0}"),
                _ => {}
            }
            let value = json!({
                "chains": d.chains.len(),
                "kept_per_chain": d.kept_per_chain(),
                "max_rhat": diag.max_rhat(),
                "min_ess": diag.min_ess(),
                "diagnostics": diag,
                "manifest": digest,
            });
            run.write_json("chains.json", &value)?;
            run.finish(&value)
        }
    }
}
