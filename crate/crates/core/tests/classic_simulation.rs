mod common;

use std::collections::BTreeMap;

use common::{median, sd, simulate, subpops, unbiased_world};
use nsum::calibration::{loo_backestimates, scale_by_visibility, VisibilityFactor};
use nsum::classic::{gnsum, johnsen_bounds, mle, ClassicMethod};
use nsum::simulator::{census_ard, erdos_renyi, network_ard, BiasConfig, SubpopSpec};

const U: usize = 8;

#[test]
fn unbiased_world_recovery_and_mle_coverage() {
    let mut errors: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    let mut covered = 0;
    for r in 0..200 {
        let w = simulate(&unbiased_world(500, 1000 + r), &BiasConfig::default());
        let s = w.survey.unwrap();
        for m in [ClassicMethod::Pimle, ClassicMethod::Mle, ClassicMethod::Mos] {
            let e = m.estimate(&s, U).unwrap();
            errors.entry(m.label()).or_default().push((e.point / 2000.0 - 1.0).abs());
            if m == ClassicMethod::Mle && e.covers(2000.0).unwrap() {
                covered += 1;
            }
        }
    }
    for (m, e) in errors {
        let med = median(e);
        assert!(med < 0.15, "{m}: median |rel error| {med}");
    }
    let coverage = covered as f64 / 200.0;
    assert!((0.88..=0.99).contains(&coverage), "coverage {coverage}");
}

#[test]
fn tiny_known_subpopulation_inflates_mos_variance() {
    let (mut mos_pts, mut mle_pts) = (Vec::new(), Vec::new());
    for r in 0..200 {
        let mut c = unbiased_world(300, 5000 + r);
        c.subpops = subpops(&[5, 1000, 2000, 3000], 2000);
        let s = simulate(&c, &BiasConfig::default()).survey.unwrap();
        mos_pts.push(ClassicMethod::Mos.estimate(&s, 4).unwrap().point);
        mle_pts.push(mle(&s, 4).unwrap().point);
    }
    assert!(sd(&mos_pts) > sd(&mle_pts), "{} vs {}", sd(&mos_pts), sd(&mle_pts));
}

#[test]
fn transmission_halves_mle_and_visibility_repairs_it() {
    let biases = BiasConfig {
        transmission: BTreeMap::from([("u".to_string(), 0.5)]),
        ..BiasConfig::default()
    };
    let (mut raw, mut fixed) = (Vec::new(), Vec::new());
    for r in 0..100 {
        let s = simulate(&unbiased_world(500, 7000 + r), &biases).survey.unwrap();
        let e = mle(&s, U).unwrap();
        raw.push(e.point / 2000.0);
        let v = scale_by_visibility(&e, &VisibilityFactor::new(0.5, "test").unwrap()).unwrap();
        fixed.push((v.point / 2000.0 - 1.0).abs());
    }
    let raw = median(raw);
    assert!((0.4..=0.6).contains(&raw), "{raw}");
    assert!(median(fixed) < 0.10);
}

#[test]
fn loo_ratios_stay_near_one_without_bias() {
    let s = simulate(&unbiased_world(500, 11), &BiasConfig::default()).survey.unwrap();
    for row in loo_backestimates(&s, ClassicMethod::Mle).unwrap() {
        assert!((0.8..=1.25).contains(&row.ratio), "{}: {}", row.subpop, row.ratio);
    }
}

fn er_specs() -> Vec<SubpopSpec> {
    [("a", 50), ("b", 100), ("c", 200), ("d", 400), ("u", 150)]
        .into_iter()
        .map(|(n, s)| SubpopSpec {
            name: n.into(),
            size: s,
            known: n != "u",
        })
        .collect()
}

#[test]
fn johnsen_bracket_contains_truth_on_random_graphs() {
    let mut hits = 0;
    for r in 0..200 {
        let g = erdos_renyi(2000, 15.0, 300 + r).unwrap();
        let w = network_ard(&g, &er_specs(), &BTreeMap::new(), "u", Some(500), None, 900 + r).unwrap();
        let b = johnsen_bounds(&w.survey, 4).unwrap();
        if b.lower <= 150 && 150 <= b.upper {
            hits += 1;
        }
    }
    assert!(hits >= 180, "{hits} of 200");
}

#[test]
fn gnsum_is_exact_on_a_census() {
    let g = erdos_renyi(2000, 12.0, 4).unwrap();
    for tau in [1.0, 0.4] {
        let t = BTreeMap::from([("u".to_string(), tau)]);
        let w = census_ard(&g, &er_specs(), &t, "u", 17).unwrap();
        let (e, _) = gnsum(&w.enriched, &w.survey, 4, &w.frame_inclusion).unwrap();
        assert_eq!(e.point, 150.0);
    }
}

#[test]
fn gnsum_and_mle_agree_under_perfect_reporting() {
    let g = erdos_renyi(2000, 20.0, 8).unwrap();
    let diffs: Vec<f64> = (0..100)
        .map(|r| {
            let w = network_ard(&g, &er_specs(), &BTreeMap::new(), "u", Some(400), Some(60), 40 + r).unwrap();
            let (e, _) = gnsum(&w.enriched, &w.survey, 4, &w.frame_inclusion).unwrap();
            e.point - mle(&w.survey, 4).unwrap().point
        })
        .collect();
    let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
    let se = sd(&diffs) / (diffs.len() as f64).sqrt();
    assert!(mean.abs() < 3.0 * se, "mean difference {mean}, MC SE {se}");
}
