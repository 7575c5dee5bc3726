use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_distr::{Beta, Binomial, Distribution, Gamma};

use super::{stage, BiasConfig, ResponseBias, SyntheticWorld};
use crate::ard::{ArdSurvey, EnrichedArd, LikertColumn};
use crate::calibration::calibration_curve;
use crate::error::Result;
use crate::rng;
use crate::special::beta_shapes;

fn binomial(trials: u64, p: f64, r: &mut rand_chacha::ChaCha8Rng) -> u32 {
    if trials == 0 || p <= 0.0 {
        return 0;
    }
    let p = p.min(1.0);
    Binomial::new(trials, p).expect("valid binomial").sample(r) as u32
}

/// Synthesizes the respondent survey (and enriched sample, when configured)
/// for a generated world.
pub fn generate_ard(world: &SyntheticWorld, biases: &BiasConfig) -> Result<SyntheticWorld> {
    let config = &world.config;
    config.check()?;
    biases.check(config)?;
    let seed = config.seed;
    let total = config.population_total as f64;
    let k_count = config.subpops.len();
    let n = world.degrees.len();

    let base: Vec<f64> = config
        .subpops
        .iter()
        .map(|s| {
            let p = s.size as f64 / total;
            match biases.recall {
                Some(rc) => calibration_curve(rc.a, rc.b, p.ln()).exp().min(1.0),
                None => p,
            }
        })
        .collect();
    let barrier: Vec<Option<(f64, f64)>> = config
        .subpops
        .iter()
        .zip(&base)
        .map(|(s, &p)| biases.barrier.get(&s.name).map(|&rho| beta_shapes(p, rho)))
        .collect();
    let omega: Vec<f64> = (0..k_count).map(|k| config.omega(k)).collect();
    let likert: Vec<Option<_>> = config.subpops.iter().map(|s| biases.likert.get(&s.name).copied()).collect();

    let mut responses = Vec::with_capacity(n * k_count);
    let mut likert_values: Vec<Vec<Option<f64>>> = vec![Vec::with_capacity(n); k_count];
    for (i, &d) in world.degrees.iter().enumerate() {
        let trials = d.round().max(0.0) as u64;
        let mut r_barrier = rng::stream(seed, &[stage::BARRIER, i as u64]);
        let mut r_prop = rng::stream(seed, &[stage::PROPENSITY, i as u64]);
        let mut r_likert = rng::stream(seed, &[stage::LIKERT, i as u64]);
        let mut r_count = rng::stream(seed, &[stage::COUNTS, i as u64]);
        for k in 0..k_count {
            let mut p = base[k];
            if let Some((a, b)) = barrier[k] {
                p = Beta::new(a, b).expect("valid beta").sample(&mut r_barrier);
            }
            if omega[k] > 1.0 {
                let mu = trials as f64 * p;
                if mu > 0.0 {
                    let shape = mu / (omega[k] - 1.0);
                    p *= Gamma::new(shape, 1.0 / shape).expect("valid gamma").sample(&mut r_prop);
                }
            }
            if let Some(l) = likert[k] {
                let x = r_likert.random_range(1..=l.upper);
                p *= (l.beta * (f64::from(x) - f64::from(l.upper))).exp();
                likert_values[k].push(Some(f64::from(x)));
            }
            responses.push(Some(binomial(trials, p, &mut r_count)));
        }
    }

    let known_sizes: BTreeMap<usize, u64> = config
        .subpops
        .iter()
        .enumerate()
        .filter(|(_, s)| s.known)
        .map(|(k, s)| (k, s.size))
        .collect();
    let unknown_columns: BTreeSet<usize> = (0..k_count).filter(|k| !config.subpops[*k].known).collect();
    let mut survey = ArdSurvey {
        respondent_ids: world.respondents.iter().map(|p| format!("p{p}")).collect(),
        columns: config.subpops.iter().map(|s| s.name.clone()).collect(),
        responses,
        population_total: config.population_total,
        known_sizes,
        unknown_columns,
        weights: None,
        covariates: None,
        likert: likert
            .iter()
            .enumerate()
            .filter_map(|(k, l)| {
                l.map(|l| {
                    (
                        k,
                        LikertColumn {
                            upper: f64::from(l.upper),
                            values: std::mem::take(&mut likert_values[k]),
                        },
                    )
                })
            })
            .collect(),
    };
    if !biases.transmission.is_empty() {
        survey = apply_transmission(&survey, &biases.transmission, seed);
    }
    if let Some(resp) = &biases.response {
        survey = apply_response_bias(&survey, resp, seed);
    }

    let enriched = biases.enriched.as_ref().map(|design| {
        let k = config.subpop_index(&design.unknown).expect("checked name");
        let size = config.subpops[k].size as f64;
        let tau = biases.transmission.get(&design.unknown).copied().unwrap_or(1.0);
        let mut r = rng::stream(seed, &[stage::ENRICHED]);
        let mut draw = config.degree.sampler();
        let m = design.sample_size;
        let mut out_reports = Vec::with_capacity(m);
        let mut aware_counts = Vec::with_capacity(m);
        for _ in 0..m {
            let out = draw(&mut r).round().max(0.0) as u64;
            out_reports.push(out as u32);
            aware_counts.push(binomial(out, tau, &mut r));
        }
        EnrichedArd {
            member_ids: (1..=m).map(|j| format!("h{j}")).collect(),
            out_reports,
            aware_counts,
            inclusion_probs: vec![m as f64 / size; m],
            frame_total: config.population_total,
        }
    });

    let mut out = world.clone();
    out.survey = Some(survey);
    out.enriched = enriched;
    out.biases = Some(biases.clone());
    Ok(out)
}

/// Thins each reported tie to subpopulation `k` independently with
/// probability `τ_k`.
pub fn apply_transmission(survey: &ArdSurvey, tau: &BTreeMap<String, f64>, seed: u64) -> ArdSurvey {
    let cols: Vec<(usize, f64)> = survey
        .columns
        .iter()
        .enumerate()
        .filter_map(|(k, c)| tau.get(c).filter(|&&t| t < 1.0).map(|&t| (k, t)))
        .collect();
    let mut out = survey.clone();
    let width = survey.n_columns();
    for i in 0..survey.n_respondents() {
        let mut r = rng::stream(seed, &[stage::TRANSMISSION, i as u64]);
        for &(k, t) in &cols {
            if let Some(y) = out.responses[i * width + k].as_mut() {
                *y = binomial(u64::from(*y), t, &mut r);
            }
        }
    }
    out
}

/// Zero-inflates then rounds large counts to the nearest multiple.
pub fn apply_response_bias(survey: &ArdSurvey, bias: &ResponseBias, seed: u64) -> ArdSurvey {
    let zeros: Vec<(usize, f64)> = survey
        .columns
        .iter()
        .enumerate()
        .filter_map(|(k, c)| bias.zero_inflation.get(c).filter(|&&z| z > 0.0).map(|&z| (k, z)))
        .collect();
    let mut out = survey.clone();
    let width = survey.n_columns();
    for i in 0..survey.n_respondents() {
        let mut r = rng::stream(seed, &[stage::RESPONSE, i as u64]);
        for &(k, z) in &zeros {
            let hit = r.random::<f64>() < z;
            if let Some(y) = out.responses[i * width + k].as_mut() {
                if hit {
                    *y = 0;
                }
            }
        }
        if let Some(above) = bias.round_above {
            let m = bias.round_to;
            for y in out.responses[i * width..(i + 1) * width].iter_mut().flatten() {
                if *y > above {
                    *y = (*y + m / 2) / m * m;
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::tests::config;
    use super::super::{generate_world, DegreeModel, EnrichedDesign, Mixing, RecallDistortion};
    use super::*;
    use crate::classic::mle;

    fn column_mean_and_var(s: &ArdSurvey, k: usize) -> (f64, f64) {
        let v: Vec<f64> = s.column(k).map(|y| f64::from(y.unwrap())).collect();
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0);
        (m, var)
    }

    #[test]
    fn unbiased_column_means_match_binomial_moments() {
        let w = generate_world(&config(2000, DegreeModel::Constant { degree: 300.0 })).unwrap();
        let s = generate_ard(&w, &BiasConfig::default()).unwrap().survey.unwrap();
        for (k, size) in [(0, 1000.0f64), (1, 4000.0), (2, 2000.0)] {
            let p = size / 100_000.0;
            let expect = 300.0 * p;
            let se = (300.0 * p * (1.0 - p) / 2000.0).sqrt();
            let (m, _) = column_mean_and_var(&s, k);
            assert!((m - expect).abs() < 3.0 * se, "column {k}: {m} vs {expect}");
        }
    }

    #[test]
    fn halved_transmission_halves_mle_and_scaling_repairs_it() {
        let w = generate_world(&config(1000, DegreeModel::LogNormal { mu: 5.0, sigma: 0.5 })).unwrap();
        let biases = BiasConfig {
            transmission: BTreeMap::from([("u".into(), 0.5)]),
            ..BiasConfig::default()
        };
        let s = generate_ard(&w, &biases).unwrap().survey.unwrap();
        let crude = mle(&s, 2).unwrap();
        assert!((crude.point / 2000.0 - 0.5).abs() < 0.1, "{}", crude.point);
        let tau = crate::calibration::VisibilityFactor::new(0.5, "truth").unwrap();
        let fixed = crate::calibration::scale_by_visibility(&crude, &tau).unwrap();
        assert!((fixed.point / 2000.0 - 1.0).abs() < 0.1);
    }

    #[test]
    fn barrier_inflates_variance() {
        let w = generate_world(&config(2000, DegreeModel::Constant { degree: 300.0 })).unwrap();
        let biases = BiasConfig {
            barrier: BTreeMap::from([("b".into(), 0.05)]),
            ..BiasConfig::default()
        };
        let s = generate_ard(&w, &biases).unwrap().survey.unwrap();
        let (m, v) = column_mean_and_var(&s, 1);
        assert!(v / m > 1.5, "{}", v / m);
    }

    #[test]
    fn propensity_mixing_gives_target_dispersion() {
        let mut c = config(1000, DegreeModel::Constant { degree: 1000.0 });
        c.mixing = Mixing::Propensity {
            omega: BTreeMap::from([("a".into(), 1.2), ("b".into(), 3.0)]),
        };
        let w = generate_world(&c).unwrap();
        let s = generate_ard(&w, &BiasConfig::default()).unwrap().survey.unwrap();
        for (k, omega, size) in [(0, 1.2, 1000.0), (1, 3.0, 4000.0)] {
            let (m, v) = column_mean_and_var(&s, k);
            // Binomial sampling removes a factor (1 - p) from the Poisson part.
            let p = size / 100_000.0;
            let expected = omega - p;
            assert!(((v / m) / expected - 1.0).abs() < 0.25, "column {k}: {} vs {expected}", v / m);
        }
    }

    #[test]
    fn stages_compose() {
        let w = generate_world(&config(300, DegreeModel::LogNormal { mu: 4.0, sigma: 0.7 })).unwrap();
        let tau = BTreeMap::from([("u".into(), 0.4)]);
        let barrier_only = BiasConfig {
            barrier: BTreeMap::from([("a".into(), 0.1)]),
            ..BiasConfig::default()
        };
        let joint = BiasConfig {
            transmission: tau.clone(),
            ..barrier_only.clone()
        };
        let staged = apply_transmission(&generate_ard(&w, &barrier_only).unwrap().survey.unwrap(), &tau, w.seed());
        assert_eq!(staged, generate_ard(&w, &joint).unwrap().survey.unwrap());
    }

    #[test]
    fn response_bias_zeroes_and_rounds() {
        let s = ArdSurvey::from_counts(
            vec!["a".into(), "u".into()],
            &[vec![12, 3], vec![13, 10], vec![28, 11]],
            1000,
            BTreeMap::from([(0, 100)]),
            BTreeSet::from([1]),
        );
        let out = apply_response_bias(&s, &ResponseBias::default(), 1);
        let got: Vec<u32> = out.responses.iter().map(|y| y.unwrap()).collect();
        assert_eq!(got, vec![10, 3, 15, 10, 30, 10]);
        let all_zero = ResponseBias {
            zero_inflation: BTreeMap::from([("a".into(), 0.999_999_999)]),
            round_above: None,
            round_to: 5,
        };
        let out = apply_response_bias(&s, &all_zero, 1);
        assert!(out.column(0).all(|y| y == Some(0)));
        assert_eq!(out.column(1).collect::<Vec<_>>(), s.column(1).collect::<Vec<_>>());
    }

    #[test]
    fn enriched_sample_respects_awareness_bound() {
        let w = generate_world(&config(200, DegreeModel::LogNormal { mu: 4.0, sigma: 0.5 })).unwrap();
        let biases = BiasConfig {
            transmission: BTreeMap::from([("u".into(), 0.3)]),
            enriched: Some(EnrichedDesign {
                unknown: "u".into(),
                sample_size: 150,
            }),
            ..BiasConfig::default()
        };
        let e = generate_ard(&w, &biases).unwrap().enriched.unwrap();
        assert!(e.check().is_ok());
        assert!(e.aware_counts.iter().zip(&e.out_reports).all(|(a, o)| a <= o));
        assert_eq!(e.inclusion_probs[0], 150.0 / 2000.0);
    }

    #[test]
    fn recall_distortion_shrinks_reported_proportions() {
        let w = generate_world(&config(1000, DegreeModel::Constant { degree: 300.0 })).unwrap();
        let plain = generate_ard(&w, &BiasConfig::default()).unwrap().survey.unwrap();
        let biases = BiasConfig {
            recall: Some(RecallDistortion { a: 1.0, b: -4.0 }),
            ..BiasConfig::default()
        };
        let distorted = generate_ard(&w, &biases).unwrap().survey.unwrap();
        assert!(column_mean_and_var(&distorted, 1).0 < column_mean_and_var(&plain, 1).0);
    }
}
