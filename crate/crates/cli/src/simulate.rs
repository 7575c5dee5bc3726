use std::collections::BTreeMap;
use std::path::Path;

use nsum::ard::{render_enriched, render_survey_csv};
use nsum::method::MethodOptions;
use nsum::rng::derive_seed;
use nsum::simulator::{
    generate_ard, generate_world, parse_scenarios, render_benchmark_csv, run_benchmark, summarize_benchmark, Scenario,
};
use serde_json::{json, Value};

use crate::args::{BenchmarkArgs, SimulateArgs};
use crate::manifest::{to_json, Run};
use crate::Failure;

fn read_scenarios(run: &mut Run, path: &Path) -> Result<Vec<Scenario>, Failure> {
    let text = run.input("scenario", path)?;
    Ok(parse_scenarios(&text)?)
}

fn degree_summary(degrees: &[f64]) -> Value {
    let n = degrees.len() as f64;
    let mean = degrees.iter().sum::<f64>() / n;
    let var = degrees.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let mut sorted = degrees.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() / 2;
    let median = if sorted.len() % 2 == 1 { sorted[m] } else { 0.5 * (sorted[m - 1] + sorted[m]) };
    json!({
        "n": degrees.len(),
        "mean": mean,
        "sd": var.sqrt(),
        "median": median,
        "min": sorted[0],
        "max": sorted[sorted.len() - 1],
    })
}

pub fn simulate(args: &SimulateArgs, seed: u64, out: Option<&Path>) -> Result<(), Failure> {
    if out.is_none() {
        return Err(Failure::usage("simulate needs --out-dir"));
    }
    let mut run = Run::new("simulate", seed, out);
    run.flag_opt("name", args.name.as_ref());
    let mut scenarios = read_scenarios(&mut run, &args.scenario)?;
    if let Some(name) = &args.name {
        scenarios.retain(|s| &s.name == name);
        if scenarios.is_empty() {
            return Err(Failure::data(format!("no scenario named {name}")));
        }
    }
    let digest = run.digest();
    let single = scenarios.len() == 1;
    let mut listed = Vec::new();
    for (s, scenario) in scenarios.iter().enumerate() {
        let mut config = scenario.world.clone();
        config.seed = if single { seed } else { derive_seed(seed, &[s as u64]) };
        let world = generate_ard(&generate_world(&config)?, &scenario.biases)?;
        let survey = world.survey.as_ref().expect("generated survey");
        let prefix = if single { String::new() } else { format!("{}/", scenario.name) };
        let (csv, sizes) = render_survey_csv(survey)?;
        run.write(&format!("{prefix}survey.csv"), csv.as_bytes())?;
        run.write(&format!("{prefix}sizes.json"), to_json(&sizes)?.as_bytes())?;
        if let Some(e) = &world.enriched {
            run.write(&format!("{prefix}enriched.csv"), render_enriched(e).as_bytes())?;
        }
        let sizes_truth: BTreeMap<&str, u64> = config.subpops.iter().map(|p| (p.name.as_str(), p.size)).collect();
        let target = scenario.target()?;
        let truth = json!({
            "scenario": scenario.name,
            "world_seed": config.seed,
            "population_total": config.population_total,
            "unknown": target,
            "true_size": world.truth(&target)?,
            "sizes": sizes_truth,
            "degrees": degree_summary(&world.degrees),
            "biases": scenario.biases,
            "manifest": digest,
        });
        run.write_json(&format!("{prefix}truth.json"), &truth)?;
        eprintln!(
            "{}: {} respondents, {} = {}",
            scenario.name,
            survey.n_respondents(),
            target,
            world.truth(&target)?
        );
        listed.push(json!({ "scenario": scenario.name, "dir": prefix, "world_seed": config.seed }));
    }
    run.finish(&json!({ "scenarios": listed, "manifest": digest }))
}

pub fn benchmark(args: &BenchmarkArgs, seed: u64, out: Option<&Path>) -> Result<(), Failure> {
    let mut run = Run::new("benchmark", seed, out);
    let labels: Vec<String> = args.method.iter().map(|m| m.label()).collect();
    run.flag("method", labels.join(","));
    run.flag("replicates", args.replicates);
    run.flag_opt("tau_prior", args.tau_prior.map(|p| format!("{},{}", p.mean, p.dispersion)));
    run.flag("chains", args.mcmc.chains);
    run.flag("burnin", args.mcmc.burnin);
    run.flag("keep", args.mcmc.keep);
    let scenarios = read_scenarios(&mut run, &args.scenario)?;
    let digest = run.digest();
    let mut options = MethodOptions {
        mcmc: args.mcmc.config(seed),
        transmission_prior: args.tau_prior,
        ..MethodOptions::default()
    };
    options.mcmc.record_latent = false;
    let rows = run_benchmark(&scenarios, &args.method, args.replicates, seed, &options)?;
    let summary = summarize_benchmark(&rows);
    for s in &summary {
        eprintln!(
            "{:<20} {:<22} median |rel err| {:>8} coverage {:>6} failures {}",
            s.scenario,
            s.estimator,
            s.median_abs_rel_error.map_or("-".into(), |v| format!("{v:.4}")),
            s.coverage.map_or("-".into(), |v| format!("{v:.3}")),
            s.failures
        );
    }
    run.write("benchmark.csv", render_benchmark_csv(&rows).as_bytes())?;
    let value = json!({ "summary": summary, "rows": rows, "manifest": digest });
    run.write_json("benchmark.json", &value)?;
    run.finish(&value)
}
