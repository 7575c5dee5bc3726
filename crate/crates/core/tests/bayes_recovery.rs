mod common;

use std::collections::BTreeMap;

use common::{maltiel_world, median, overdispersed_world, simulate, unbiased_world};
use nsum::bayes::{
    fit_maltiel, fit_overdispersed, fit_teo, fit_zheng, overdispersed_log_likelihood, posterior_size, renormalize_betas,
    BarrierPrior, BetaMeanDispersion, MaltielPriors, MaltielVariant, McmcConfig, OverdispersedPriors, PosteriorDraws,
    TeoPriors, TeoVariant,
};
use nsum::simulator::{BiasConfig, LikertTransmission};

fn quick(seed: u64) -> McmcConfig {
    McmcConfig {
        chains: 2,
        burn_in: 1000,
        keep: 1000,
        seed,
        ..McmcConfig::default()
    }
}

fn post_median(d: &PosteriorDraws, name: &str) -> f64 {
    median(d.pooled(name).unwrap_or_else(|| panic!("missing {name}")))
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}

#[test]
fn overdispersion_levels_are_recovered() {
    let w = simulate(&overdispersed_world(300, &[1.2, 3.0], 21), &BiasConfig::default());
    let s = w.survey.unwrap();
    let d = fit_overdispersed(&s, &OverdispersedPriors::default(), &quick(5)).unwrap();
    for (k, c) in s.columns.iter().enumerate() {
        let truth = if k % 2 == 0 { 1.2 } else { 3.0 };
        let m = post_median(&d, &format!("omega[{c}]"));
        assert!((m / truth - 1.0).abs() < 0.35, "{c}: {m} vs {truth}");
    }
}

#[test]
fn poisson_data_pushes_omega_to_the_boundary() {
    let w = simulate(&overdispersed_world(300, &[1.0], 22), &BiasConfig::default());
    let d = fit_overdispersed(&w.survey.unwrap(), &OverdispersedPriors::default(), &quick(6)).unwrap();
    for p in d.params.iter().filter(|p| p.starts_with("omega[")) {
        let m = post_median(&d, p);
        assert!(m < 1.15, "{p}: {m}");
    }
}

#[test]
fn renormalized_draws_keep_likelihood_and_track_degrees() {
    let w = simulate(&unbiased_world(300, 23), &BiasConfig::default());
    let s = w.survey.clone().unwrap();
    let raw = fit_overdispersed(&s, &OverdispersedPriors::default(), &quick(7)).unwrap();
    let total = s.population_total as f64;
    let rare: BTreeMap<String, f64> = s
        .known_sizes
        .iter()
        .map(|(&k, &n)| (s.columns[k].clone(), n as f64 / total))
        .collect();
    let norm = renormalize_betas(&raw, &rare).unwrap();
    let index = |prefix: &str| -> Vec<usize> {
        (0..raw.params.len()).filter(|&p| raw.params[p].starts_with(prefix)).collect()
    };
    let (ai, bi, wi) = (index("alpha["), index("beta["), index("omega["));
    for t in (0..raw.kept_per_chain()).step_by(50) {
        let ll = |d: &PosteriorDraws| {
            let v = d.draw(0, t);
            let pick = |idx: &[usize]| idx.iter().map(|&p| v[p]).collect::<Vec<_>>();
            overdispersed_log_likelihood(&s, &pick(&ai), &pick(&bi), &pick(&wi))
        };
        assert!((ll(&raw) - ll(&norm)).abs() < 1e-8);
    }

    let fitted = fit_zheng(&s, &OverdispersedPriors::default(), &quick(7), None).unwrap();
    let means: Vec<f64> = s
        .respondent_ids
        .iter()
        .map(|id| {
            let v = fitted.pooled(&format!("alpha[{id}]")).unwrap();
            v.iter().map(|a| a.exp()).sum::<f64>() / v.len() as f64
        })
        .collect();
    let r = pearson(&means, &w.degrees);
    assert!(r > 0.8, "correlation {r}");
}

#[test]
fn barrier_dispersion_shows_as_overdispersion_in_order() {
    let mut c = overdispersed_world(400, &[1.0], 24);
    c.mixing = Default::default();
    let biases = BiasConfig {
        barrier: BTreeMap::from([("k1".to_string(), 0.001), ("k3".to_string(), 0.01)]),
        ..BiasConfig::default()
    };
    let s = simulate(&c, &biases).survey.unwrap();
    let d = fit_overdispersed(&s, &OverdispersedPriors::default(), &quick(8)).unwrap();
    let (w1, w2, w3) = (post_median(&d, "omega[k1]"), post_median(&d, "omega[k2]"), post_median(&d, "omega[k3]"));
    assert!(w3 > w1 && w1 > w2, "{w1} {w2} {w3}");
}

fn maltiel(s: &nsum::ArdSurvey, v: MaltielVariant, priors: &MaltielPriors, tau: Option<BetaMeanDispersion>, seed: u64) -> PosteriorDraws {
    fit_maltiel(s, 5, v, priors, tau, &quick(seed)).unwrap()
}

#[test]
fn maltiel_random_degree_recovers_size() {
    let errors: Vec<f64> = (0..3)
        .map(|r| {
            let s = simulate(&maltiel_world(500, 30 + r), &BiasConfig::default()).survey.unwrap();
            let d = maltiel(&s, MaltielVariant::RandomDegree, &MaltielPriors::default(), None, r);
            (post_median(&d, "size[u]") / 1000.0 - 1.0).abs()
        })
        .collect();
    assert!(median(errors.clone()) < 0.2, "{errors:?}");
}

#[test]
fn combined_model_with_degenerate_priors_nests_random_degree() {
    let s = simulate(&maltiel_world(500, 40), &BiasConfig::default()).survey.unwrap();
    let base = maltiel(&s, MaltielVariant::RandomDegree, &MaltielPriors::default(), None, 1);
    let priors = MaltielPriors {
        barrier: BarrierPrior::Fixed(1e-6),
        ..MaltielPriors::default()
    };
    let tau = BetaMeanDispersion {
        mean: 0.9999,
        dispersion: 1e-6,
    };
    let nested = maltiel(&s, MaltielVariant::Combined, &priors, Some(tau), 2);
    let (a, b) = (post_median(&base, "size[u]"), post_median(&nested, "size[u]"));
    assert!((a / b - 1.0).abs() < 0.05, "{a} vs {b}");
}

#[test]
fn maltiel_transmission_prior_corrects_invisibility() {
    let biases = BiasConfig {
        transmission: BTreeMap::from([("u".to_string(), 0.5)]),
        ..BiasConfig::default()
    };
    let s = simulate(&maltiel_world(500, 50), &biases).survey.unwrap();
    let naive = post_median(&maltiel(&s, MaltielVariant::RandomDegree, &MaltielPriors::default(), None, 3), "size[u]");
    let tau = BetaMeanDispersion {
        mean: 0.5,
        dispersion: 0.01,
    };
    let corrected = post_median(
        &maltiel(&s, MaltielVariant::Transmission, &MaltielPriors::default(), Some(tau), 4),
        "size[u]",
    );
    assert!((0.35..=0.65).contains(&(naive / 1000.0)), "{naive}");
    assert!((corrected / 1000.0 - 1.0).abs() < 0.25, "{corrected}");
}

#[test]
fn maltiel_intervals_cover_truth() {
    let config = McmcConfig {
        chains: 2,
        burn_in: 500,
        keep: 500,
        record_latent: false,
        ..McmcConfig::default()
    };
    let covered = (0..50)
        .filter(|&r| {
            let s = simulate(&maltiel_world(200, 600 + r), &BiasConfig::default()).survey.unwrap();
            let d = fit_maltiel(&s, 5, MaltielVariant::RandomDegree, &MaltielPriors::default(), None, &McmcConfig { seed: r, ..config.clone() }).unwrap();
            posterior_size(&d, "u").unwrap().covers(1000.0).unwrap()
        })
        .count();
    assert!(covered >= 45, "{covered} of 50");
}

fn teo_survey(beta: f64, seed: u64) -> nsum::ArdSurvey {
    let biases = BiasConfig {
        likert: BTreeMap::from([("u".to_string(), LikertTransmission { upper: 5, beta })]),
        ..BiasConfig::default()
    };
    simulate(&maltiel_world(400, seed), &biases).survey.unwrap()
}

#[test]
fn teo_null_transmission_concentrates_at_zero() {
    let d = fit_teo(&teo_survey(0.0, 70), 5, TeoVariant::Transmission, &TeoPriors::default(), &quick(9)).unwrap();
    let b = post_median(&d, "beta[u]");
    assert!(b.abs() < 0.1, "{b}");
}

#[test]
fn teo_recovers_transmission_sign() {
    let config = McmcConfig {
        record_latent: false,
        ..quick(0)
    };
    let positive = (0..10)
        .filter(|&r| {
            let s = teo_survey(0.3, 80 + r);
            let d = fit_teo(&s, 5, TeoVariant::Transmission, &TeoPriors::default(), &McmcConfig { seed: r, ..config.clone() }).unwrap();
            post_median(&d, "beta[u]") > 0.0
        })
        .count();
    assert!(positive >= 9, "{positive} of 10");
}
