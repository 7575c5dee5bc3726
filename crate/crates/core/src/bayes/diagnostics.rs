use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::PosteriorDraws;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDiagnostics {
    pub name: String,
    /// Split R-hat; omitted for single-chain runs.
    pub rhat: Option<f64>,
    pub ess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    pub params: Vec<ParamDiagnostics>,
    /// Per block, the post-burn-in acceptance rate of each chain.
    pub acceptance: BTreeMap<String, Vec<f64>>,
    pub warnings: Vec<String>,
}

impl ChainDiagnostics {
    pub fn max_rhat(&self) -> Option<f64> {
        self.params.iter().filter_map(|p| p.rhat).reduce(f64::max)
    }

    pub fn min_ess(&self) -> Option<f64> {
        self.params.iter().map(|p| p.ess).reduce(f64::min)
    }
}

pub fn diagnostics(draws: &PosteriorDraws) -> ChainDiagnostics {
    let mut warnings = Vec::new();
    let multi = draws.chains.len() >= 2;
    if !multi {
        warnings.push("single chain: R-hat omitted".to_string());
    }
    let params = draws
        .params
        .iter()
        .enumerate()
        .map(|(p, name)| {
            let chains: Vec<&[f64]> = draws.chains.iter().map(|c| c.values[p].as_slice()).collect();
            ParamDiagnostics {
                name: name.clone(),
                rhat: multi.then(|| split_rhat(&chains)),
                ess: effective_sample_size(&chains),
            }
        })
        .collect();
    let mut acceptance: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for chain in &draws.chains {
        for (block, &rate) in &chain.acceptance {
            acceptance.entry(block.clone()).or_default().push(rate);
        }
    }
    ChainDiagnostics {
        params,
        acceptance,
        warnings,
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn sample_var(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Between- and within-chain variances `(B/n, W)` for equal-length chains.
fn variance_components(chains: &[&[f64]]) -> (f64, f64) {
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let b_over_n = if chains.len() > 1 { sample_var(&means) } else { 0.0 };
    let w = chains.iter().map(|c| sample_var(c)).sum::<f64>() / chains.len() as f64;
    (b_over_n, w)
}

/// Split R-hat: each chain is halved and the halves treated as chains.
/// Returns infinity when within-half variance is zero but halves differ.
pub fn split_rhat(chains: &[&[f64]]) -> f64 {
    let half = chains.iter().map(|c| c.len()).min().unwrap_or(0) / 2;
    if half < 2 {
        return f64::NAN;
    }
    let halves: Vec<&[f64]> = chains
        .iter()
        .flat_map(|c| [&c[..half], &c[c.len() - half..]])
        .collect();
    let (b_over_n, w) = variance_components(&halves);
    if w <= 0.0 {
        return if b_over_n > 0.0 { f64::INFINITY } else { 1.0 };
    }
    let n = half as f64;
    let var_plus = (n - 1.0) / n * w + b_over_n;
    (var_plus / w).sqrt()
}

/// Multi-chain effective sample size with Geyer's initial positive sequence,
/// made monotone.
pub fn effective_sample_size(chains: &[&[f64]]) -> f64 {
    let n = chains.iter().map(|c| c.len()).min().unwrap_or(0);
    let m = chains.len();
    let total = (n * m) as f64;
    if n < 4 {
        return total;
    }
    let chains: Vec<&[f64]> = chains.iter().map(|c| &c[..n]).collect();
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let (b_over_n, w) = variance_components(&chains);
    let nf = n as f64;
    let var_plus = (nf - 1.0) / nf * w + b_over_n;
    if var_plus <= 0.0 || w <= 0.0 {
        return total;
    }
    // Biased autocovariance of chain `c` at `lag`, divided by n.
    let acov = |lag: usize| -> f64 {
        chains
            .iter()
            .zip(&means)
            .map(|(c, &mu)| {
                let s: f64 = (0..n - lag).map(|t| (c[t] - mu) * (c[t + lag] - mu)).sum();
                s / nf
            })
            .sum::<f64>()
            / m as f64
    };
    let rho = |lag: usize| 1.0 - (w - acov(lag)) / var_plus;

    let mut tau = -1.0;
    let mut prev_pair = f64::INFINITY;
    let mut lag = 0;
    while lag + 1 < n {
        let mut pair = if lag == 0 { 1.0 + rho(1) } else { rho(lag) + rho(lag + 1) };
        if pair <= 0.0 {
            break;
        }
        if pair > prev_pair {
            pair = prev_pair;
        }
        prev_pair = pair;
        tau += 2.0 * pair;
        lag += 2;
    }
    (total / tau.max(1.0)).min(total)
}

#[cfg(test)]
mod tests {
    use rand::Rng;
    use rand_distr::StandardNormal;

    use super::*;
    use crate::rng;

    fn iid_chains(c: usize, t: usize, seed: u64) -> Vec<Vec<f64>> {
        (0..c)
            .map(|k| {
                let mut r = rng::stream(seed, &[k as u64]);
                (0..t).map(|_| r.sample::<f64, _>(StandardNormal)).collect()
            })
            .collect()
    }

    #[test]
    fn iid_normal_chains_mix() {
        let chains = iid_chains(4, 2000, 3);
        let refs: Vec<&[f64]> = chains.iter().map(Vec::as_slice).collect();
        let r = split_rhat(&refs);
        assert!((1.0 - 1e-3..=1.05).contains(&r), "{r}");
        let ess = effective_sample_size(&refs);
        assert!((ess - 8000.0).abs() < 0.2 * 8000.0, "{ess}");
    }

    #[test]
    fn disjoint_constants_diverge() {
        let a = vec![0.0; 500];
        let b = vec![1.0; 500];
        assert!(split_rhat(&[&a, &b]) > 10.0);
        assert_eq!(split_rhat(&[&a, &a]), 1.0);
    }

    #[test]
    fn autocorrelated_chain_has_smaller_ess() {
        let mut r = rng::stream(11, &[]);
        let chains: Vec<Vec<f64>> = (0..4)
            .map(|_| {
                let mut x = 0.0;
                (0..4000)
                    .map(|_| {
                        x = 0.9 * x + r.sample::<f64, _>(StandardNormal);
                        x
                    })
                    .collect()
            })
            .collect();
        let refs: Vec<&[f64]> = chains.iter().map(Vec::as_slice).collect();
        let ess = effective_sample_size(&refs);
        // AR(1) with phi = 0.9: integrated time (1 + phi) / (1 - phi) = 19.
        let expected = 16000.0 / 19.0;
        assert!((ess - expected).abs() < 0.3 * expected, "{ess}");
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(32))]
        #[test]
        fn ess_bounded_by_total_and_rhat_at_least_one(seed in 0u64..1000) {
            let chains = iid_chains(3, 300, seed);
            let refs: Vec<&[f64]> = chains.iter().map(Vec::as_slice).collect();
            let r = split_rhat(&refs);
            proptest::prop_assert!(r >= 1.0 - 0.02);
            let ess = effective_sample_size(&refs);
            proptest::prop_assert!(ess > 0.0 && ess <= 900.0);
        }
    }
}
