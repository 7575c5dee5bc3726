#![allow(dead_code)]

use std::collections::BTreeMap;

use nsum::simulator::{generate_ard, generate_world, BiasConfig, DegreeModel, Mixing, SubpopSpec, SyntheticWorld, WorldConfig};

pub fn subpops(known: &[u64], unknown: u64) -> Vec<SubpopSpec> {
    let mut out: Vec<SubpopSpec> = known
        .iter()
        .enumerate()
        .map(|(k, &size)| SubpopSpec {
            name: format!("k{}", k + 1),
            size,
            known: true,
        })
        .collect();
    out.push(SubpopSpec {
        name: "u".into(),
        size: unknown,
        known: false,
    });
    out
}

/// Eight known columns from 500 to 4000 plus `u` at 2% of N = 10^5.
pub fn unbiased_world(n: usize, seed: u64) -> WorldConfig {
    WorldConfig {
        population_total: 100_000,
        respondents: n,
        subpops: subpops(&[500, 800, 1000, 1500, 2000, 2500, 3000, 4000], 2000),
        degree: DegreeModel::LogNormal { mu: 5.5, sigma: 0.6 },
        mixing: Mixing::Uniform,
        seed,
    }
}

pub fn overdispersed_world(n: usize, omega: &[f64], seed: u64) -> WorldConfig {
    let sizes = [1000, 1500, 2000, 3000, 4000];
    let sp = subpops(&sizes, 2500);
    let omega: BTreeMap<String, f64> = sp.iter().zip(omega.iter().cycle()).map(|(s, &w)| (s.name.clone(), w)).collect();
    WorldConfig {
        population_total: 100_000,
        respondents: n,
        subpops: sp,
        degree: DegreeModel::LogNormal { mu: 6.0, sigma: 0.5 },
        mixing: Mixing::Propensity { omega },
        seed,
    }
}

/// Degrees lognormal(5, 1), n = 500, `u` at 1% of N.
pub fn maltiel_world(n: usize, seed: u64) -> WorldConfig {
    WorldConfig {
        population_total: 100_000,
        respondents: n,
        subpops: subpops(&[1000, 2000, 3000, 4000, 5000], 1000),
        degree: DegreeModel::LogNormal { mu: 5.0, sigma: 1.0 },
        mixing: Mixing::Uniform,
        seed,
    }
}

pub fn simulate(config: &WorldConfig, biases: &BiasConfig) -> SyntheticWorld {
    generate_ard(&generate_world(config).unwrap(), biases).unwrap()
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

pub fn sd(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)).sqrt()
}
