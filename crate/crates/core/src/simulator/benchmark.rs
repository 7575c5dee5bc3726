use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{generate_ard, generate_world, Scenario};
use crate::error::{NsumError, Result};
use crate::method::{estimate, Method, MethodOptions};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub scenario: String,
    pub estimator: String,
    pub replicate: usize,
    pub point: Option<f64>,
    pub truth: f64,
    pub rel_error: Option<f64>,
    pub covered: Option<bool>,
    /// Estimator failure message; the other result fields are empty.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSummary {
    pub scenario: String,
    pub estimator: String,
    pub replicates: usize,
    pub failures: usize,
    pub median_abs_rel_error: Option<f64>,
    pub sd_rel_error: Option<f64>,
    pub coverage: Option<f64>,
}

fn replicate_rows(
    scenario: &Scenario,
    s: usize,
    r: usize,
    methods: &[Method],
    seed: u64,
    options: &MethodOptions,
) -> Result<Vec<BenchmarkRow>> {
    let mut config = scenario.world.clone();
    config.seed = rng::derive_seed(seed, &[s as u64, r as u64]);
    let world = generate_ard(&generate_world(&config)?, &scenario.biases)?;
    let survey = world.survey.as_ref().expect("generated survey");
    let target = scenario.target()?;
    let unknown = survey
        .column_index(&target)
        .ok_or_else(|| NsumError::InvalidInput(format!("no column named {target}")))?;
    let truth = world.truth(&target)? as f64;
    let mut options = options.clone();
    options.mcmc.seed = rng::derive_seed(seed, &[s as u64, r as u64, 0x6d]);
    if options.enriched.is_none() {
        options.enriched = world.enriched.clone();
    }
    if options.frame_inclusion.is_none() {
        options.frame_inclusion = Some(world.frame_inclusion());
    }
    Ok(methods
        .iter()
        .map(|&m| {
            let base = BenchmarkRow {
                scenario: scenario.name.clone(),
                estimator: m.label(),
                replicate: r,
                point: None,
                truth,
                rel_error: None,
                covered: None,
                error: None,
            };
            match estimate(m, survey, unknown, &options) {
                Ok(out) => BenchmarkRow {
                    point: Some(out.estimate.point),
                    rel_error: Some((out.estimate.point - truth) / truth),
                    covered: out.estimate.covers(truth),
                    ..base
                },
                Err(e) => BenchmarkRow {
                    error: Some(e.to_string()),
                    ..base
                },
            }
        })
        .collect())
}

/// Runs every method on `replicates` fresh worlds per scenario. World seeds
/// derive from `(seed, scenario index, replicate)`, so results do not depend
/// on thread count. Estimator failures are recorded in their row.
pub fn run_benchmark(
    scenarios: &[Scenario],
    methods: &[Method],
    replicates: usize,
    seed: u64,
    options: &MethodOptions,
) -> Result<Vec<BenchmarkRow>> {
    if scenarios.is_empty() {
        return Err(NsumError::InvalidInput("benchmark needs at least one scenario".into()));
    }
    if methods.is_empty() {
        return Err(NsumError::InvalidInput("benchmark needs at least one method".into()));
    }
    for s in scenarios {
        s.check()?;
    }
    let jobs: Vec<(usize, usize)> = (0..scenarios.len())
        .flat_map(|s| (0..replicates).map(move |r| (s, r)))
        .collect();
    let parts: Vec<Vec<BenchmarkRow>> = jobs
        .par_iter()
        .map(|&(s, r)| replicate_rows(&scenarios[s], s, r, methods, seed, options))
        .collect::<Result<_>>()?;
    Ok(parts.into_iter().flatten().collect())
}

fn median(mut x: Vec<f64>) -> Option<f64> {
    if x.is_empty() {
        return None;
    }
    x.sort_by(f64::total_cmp);
    let m = x.len() / 2;
    Some(if x.len() % 2 == 1 { x[m] } else { 0.5 * (x[m - 1] + x[m]) })
}

/// One summary per (scenario, estimator), in first-seen order.
pub fn summarize_benchmark(rows: &[BenchmarkRow]) -> Vec<BenchmarkSummary> {
    let mut keys: Vec<(String, String)> = Vec::new();
    for row in rows {
        let key = (row.scenario.clone(), row.estimator.clone());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(scenario, estimator)| {
            let group: Vec<&BenchmarkRow> = rows
                .iter()
                .filter(|r| r.scenario == scenario && r.estimator == estimator)
                .collect();
            let errors: Vec<f64> = group.iter().filter_map(|r| r.rel_error).collect();
            let sd = (errors.len() >= 2).then(|| {
                let m = errors.iter().sum::<f64>() / errors.len() as f64;
                (errors.iter().map(|e| (e - m) * (e - m)).sum::<f64>() / (errors.len() - 1) as f64).sqrt()
            });
            let covered: Vec<bool> = group.iter().filter_map(|r| r.covered).collect();
            BenchmarkSummary {
                replicates: group.len(),
                failures: group.iter().filter(|r| r.error.is_some()).count(),
                median_abs_rel_error: median(errors.iter().map(|e| e.abs()).collect()),
                sd_rel_error: sd,
                coverage: (!covered.is_empty())
                    .then(|| covered.iter().filter(|&&c| c).count() as f64 / covered.len() as f64),
                scenario,
                estimator,
            }
        })
        .collect()
}

fn cell<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn render_benchmark_csv(rows: &[BenchmarkRow]) -> String {
    let mut out = String::from("scenario,estimator,replicate,point,truth,rel_error,covered\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.scenario,
            r.estimator,
            r.replicate,
            cell(r.point),
            r.truth,
            cell(r.rel_error),
            cell(r.covered)
        ));
    }
    out
}
