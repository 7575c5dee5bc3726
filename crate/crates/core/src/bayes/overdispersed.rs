//! Overdispersed model: `y_ik ~ NegBin(mean e^{α_i + β_k}, Var = ω_k · mean)`.
//!
//! `α_i ~ N(0, σ_α²)`, `β_k ~ N(0, s_β²)`, and `1/ω_k ~ Uniform(0, 1)`, sampled
//! as `θ_k = ln(ω_k - 1)`. The likelihood only sees `α_i + β_k`, so each sweep
//! ends with an exact Gibbs draw of the shift `α + c, β - c`.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{accept, run_chains, ChainSampler, McmcConfig, PosteriorDraws, Tuning};
use crate::ard::ArdSurvey;
use crate::error::{NsumError, Result};
use crate::special::{lgamma_rising, log1p_exp, neg_binomial_ln_pmf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverdispersedPriors {
    pub beta_sd: f64,
    /// Inverse-gamma shape and scale on `σ_α²`.
    pub sigma_alpha_shape: f64,
    pub sigma_alpha_scale: f64,
}

impl Default for OverdispersedPriors {
    fn default() -> Self {
        OverdispersedPriors {
            beta_sd: 10.0,
            sigma_alpha_shape: 1.0,
            sigma_alpha_scale: 1.0,
        }
    }
}

/// Log-likelihood of the survey at one parameter value, integrated
/// negative-binomial form.
pub fn overdispersed_log_likelihood(survey: &ArdSurvey, alpha: &[f64], beta: &[f64], omega: &[f64]) -> f64 {
    let mut ll = 0.0;
    for i in 0..survey.n_respondents() {
        for (k, y) in survey.row(i).iter().enumerate() {
            if let Some(y) = *y {
                ll += neg_binomial_ln_pmf(y, (alpha[i] + beta[k]).exp(), omega[k]);
            }
        }
    }
    ll
}

struct Sampler<'a> {
    survey: &'a ArdSurvey,
    priors: &'a OverdispersedPriors,
    rows: Vec<Vec<(usize, u32)>>,
    cols: Vec<Vec<(usize, u32)>>,
    record_latent: bool,
}

struct State {
    alpha: Vec<f64>,
    beta: Vec<f64>,
    theta: Vec<f64>,
    sigma2: f64,
}

/// Column constants for the negative-binomial kernel at `θ = ln(ω - 1)`.
#[derive(Clone, Copy)]
struct NbConst {
    inv_excess: f64,
    ln_omega: f64,
    count_coef: f64,
}

impl NbConst {
    fn new(theta: f64) -> Self {
        let ln_omega = log1p_exp(theta);
        NbConst {
            inv_excess: (-theta).exp(),
            ln_omega,
            count_coef: theta - ln_omega,
        }
    }

    /// Log-pmf at mean `mu` without the `-ln y!` term.
    fn kernel(&self, y: u32, mu: f64) -> f64 {
        let size = mu * self.inv_excess;
        lgamma_rising(size, y) - size * self.ln_omega + f64::from(y) * self.count_coef
    }
}

fn theta_log_prior(t: f64) -> f64 {
    t - 2.0 * log1p_exp(t)
}

impl ChainSampler for Sampler<'_> {
    type State = State;

    fn param_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        if self.record_latent {
            names.extend(self.survey.respondent_ids.iter().map(|id| format!("alpha[{id}]")));
        }
        names.extend(self.survey.columns.iter().map(|c| format!("beta[{c}]")));
        names.extend(self.survey.columns.iter().map(|c| format!("omega[{c}]")));
        names.push("sigma_alpha".into());
        names
    }

    fn tuning(&self) -> Tuning {
        let mut t = Tuning::default();
        t.add("alpha", self.rows.len(), 0.3);
        t.add("beta", self.cols.len(), 0.1);
        t.add("omega", self.cols.len(), 0.5);
        t
    }

    fn init(&self, _chain: usize, rng: &mut ChaCha8Rng) -> State {
        let mut z = || rng.sample::<f64, _>(StandardNormal);
        let col_mean: Vec<f64> = self
            .cols
            .iter()
            .map(|c| c.iter().map(|&(_, y)| f64::from(y)).sum::<f64>() / c.len().max(1) as f64)
            .collect();
        let beta: Vec<f64> = col_mean.iter().map(|m| (m + 0.1).ln() + 0.1 * z()).collect();
        let alpha: Vec<f64> = self
            .rows
            .iter()
            .map(|r| {
                let obs: f64 = r.iter().map(|&(_, y)| f64::from(y)).sum();
                let exp: f64 = r.iter().map(|&(k, _)| col_mean[k]).sum();
                ((obs + 0.5) / (exp + 0.5)).ln() + 0.1 * z()
            })
            .collect();
        let theta = (0..self.cols.len()).map(|_| -0.7 + 0.5 * z()).collect();
        let sigma2 = alpha.iter().map(|a| a * a).sum::<f64>() / alpha.len() as f64 + 0.1;
        State {
            alpha,
            beta,
            theta,
            sigma2,
        }
    }

    fn sweep(&self, s: &mut State, tuning: &mut Tuning, rng: &mut ChaCha8Rng) {
        let sd_b = self.priors.beta_sd;
        let consts: Vec<NbConst> = s.theta.iter().map(|&t| NbConst::new(t)).collect();
        let exp_beta: Vec<f64> = s.beta.iter().map(|b| b.exp()).collect();
        for i in 0..self.rows.len() {
            let a = s.alpha[i];
            let prop = a + tuning.blocks[0].step(i, rng);
            let ll = |x: f64| -> f64 {
                let ex = x.exp();
                self.rows[i]
                    .iter()
                    .map(|&(k, y)| consts[k].kernel(y, ex * exp_beta[k]))
                    .sum::<f64>()
                    - x * x / (2.0 * s.sigma2)
            };
            let ok = accept(ll(prop) - ll(a), rng);
            if ok {
                s.alpha[i] = prop;
            }
            tuning.blocks[0].record(i, ok);
        }
        let exp_alpha: Vec<f64> = s.alpha.iter().map(|a| a.exp()).collect();
        for k in 0..self.cols.len() {
            let ll = |x: f64, c: &NbConst| -> f64 {
                let ex = x.exp();
                self.cols[k]
                    .iter()
                    .map(|&(i, y)| c.kernel(y, exp_alpha[i] * ex))
                    .sum::<f64>()
            };
            let b = s.beta[k];
            let c = consts[k];
            let mut current = ll(b, &c);
            let prop = b + tuning.blocks[1].step(k, rng);
            let proposed = ll(prop, &c);
            let ok = accept(proposed - current - (prop * prop - b * b) / (2.0 * sd_b * sd_b), rng);
            if ok {
                s.beta[k] = prop;
                current = proposed;
            }
            tuning.blocks[1].record(k, ok);

            let t = s.theta[k];
            let prop = t + tuning.blocks[2].step(k, rng);
            let ok = accept(
                ll(s.beta[k], &NbConst::new(prop)) - current + theta_log_prior(prop) - theta_log_prior(t),
                rng,
            );
            if ok {
                s.theta[k] = prop;
            }
            tuning.blocks[2].record(k, ok);
        }

        let n = s.alpha.len() as f64;
        let ss: f64 = s.alpha.iter().map(|a| a * a).sum();
        let shape = self.priors.sigma_alpha_shape + 0.5 * n;
        let rate = self.priors.sigma_alpha_scale + 0.5 * ss;
        let g: f64 = Gamma::new(shape, 1.0 / rate).expect("valid gamma").sample(rng);
        s.sigma2 = 1.0 / g;

        let kf = s.beta.len() as f64;
        let precision = n / s.sigma2 + kf / (sd_b * sd_b);
        let mean = (-s.alpha.iter().sum::<f64>() / s.sigma2 + s.beta.iter().sum::<f64>() / (sd_b * sd_b)) / precision;
        let c = mean + rng.sample::<f64, _>(StandardNormal) / precision.sqrt();
        s.alpha.iter_mut().for_each(|a| *a += c);
        s.beta.iter_mut().for_each(|b| *b -= c);
    }

    fn record(&self, s: &State, out: &mut Vec<f64>) {
        if self.record_latent {
            out.extend_from_slice(&s.alpha);
        }
        out.extend_from_slice(&s.beta);
        out.extend(s.theta.iter().map(|t| 1.0 + t.exp()));
        out.push(s.sigma2.sqrt());
    }
}

/// Fits the overdispersed model to every column, known and unknown alike.
/// Known sizes play no part; use [`renormalize_betas`] to fix the scale.
pub fn fit_overdispersed(
    survey: &ArdSurvey,
    priors: &OverdispersedPriors,
    config: &McmcConfig,
) -> Result<PosteriorDraws> {
    let (n, k) = (survey.n_respondents(), survey.n_columns());
    if n < 2 || k < 2 {
        return Err(NsumError::InvalidInput(format!(
            "overdispersed model needs at least 2 respondents and 2 columns, got {n} and {k}"
        )));
    }
    if !(priors.beta_sd > 0.0 && priors.sigma_alpha_shape > 0.0 && priors.sigma_alpha_scale > 0.0) {
        return Err(NsumError::InvalidInput("prior scales must be positive".into()));
    }
    let mut rows = vec![Vec::new(); n];
    let mut cols = vec![Vec::new(); k];
    for i in 0..n {
        for c in 0..k {
            if let Some(y) = survey.get(i, c) {
                rows[i].push((c, y));
                cols[c].push((i, y));
            }
        }
    }
    let sampler = Sampler {
        survey,
        priors,
        rows,
        cols,
        record_latent: config.record_latent,
    };
    let mut draws = run_chains(&sampler, "overdispersed", config)?;
    draws.decisions.push(
        "negative binomial with Var = omega * mean; gamma-mixture shape is mean/(omega - 1)".into(),
    );
    Ok(draws)
}

/// Shifts each draw along the nonidentified direction so that the rare
/// columns' `Σ e^{β_k}` matches their known `Σ N_k / N`.
pub fn renormalize_betas(draws: &PosteriorDraws, rare_proportions: &BTreeMap<String, f64>) -> Result<PosteriorDraws> {
    if rare_proportions.is_empty() {
        return Err(NsumError::InvalidInput("renormalization needs at least one rare column".into()));
    }
    let mut rare_idx = Vec::new();
    for (name, &p) in rare_proportions {
        if !(p > 0.0 && p < 1.0) {
            return Err(NsumError::InvalidInput(format!("rare proportion for {name} must lie in (0, 1)")));
        }
        let idx = draws
            .param_index(&format!("beta[{name}]"))
            .ok_or_else(|| NsumError::MissingParameter(format!("beta[{name}]")))?;
        rare_idx.push(idx);
    }
    let target: f64 = rare_proportions.values().sum::<f64>().ln();
    let betas: Vec<usize> = (0..draws.params.len()).filter(|&p| draws.params[p].starts_with("beta[")).collect();
    let alphas: Vec<usize> = (0..draws.params.len()).filter(|&p| draws.params[p].starts_with("alpha[")).collect();

    let mut out = draws.clone();
    for chain in &mut out.chains {
        for t in 0..chain.values.first().map_or(0, Vec::len) {
            let lse = log_sum_exp(rare_idx.iter().map(|&p| chain.values[p][t]));
            let c = lse - target;
            if c == 0.0 {
                continue;
            }
            for &p in &alphas {
                chain.values[p][t] += c;
            }
            for &p in &betas {
                chain.values[p][t] -= c;
            }
        }
    }
    out.decisions.push(format!(
        "betas renormalized on rare columns {}",
        rare_proportions.keys().cloned().collect::<Vec<_>>().join(",")
    ));
    Ok(out)
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    m + xs.map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Adds `size[u] = N e^{β_u}` for every unknown column of the survey.
pub fn with_unknown_sizes(draws: &PosteriorDraws, survey: &ArdSurvey) -> Result<PosteriorDraws> {
    let mut out = draws.clone();
    let total = survey.population_total as f64;
    for &u in &survey.unknown_columns {
        let name = &survey.columns[u];
        let p = out
            .param_index(&format!("beta[{name}]"))
            .ok_or_else(|| NsumError::MissingParameter(format!("beta[{name}]")))?;
        out.push_derived(format!("size[{name}]"), move |v| total * v[p].exp());
    }
    Ok(out)
}

/// Fit, renormalize on `rare` (all known columns when `None`) and add
/// unknown-size draws.
pub fn fit_zheng(
    survey: &ArdSurvey,
    priors: &OverdispersedPriors,
    config: &McmcConfig,
    rare: Option<&BTreeSet<usize>>,
) -> Result<PosteriorDraws> {
    let total = survey.population_total as f64;
    let rare_cols: Vec<usize> = match rare {
        Some(set) => {
            for k in set {
                if !survey.known_sizes.contains_key(k) {
                    return Err(NsumError::InvalidInput(format!("rare column #{k} is not a known column")));
                }
            }
            set.iter().copied().collect()
        }
        None => survey.known_sizes.keys().copied().collect(),
    };
    let proportions: BTreeMap<String, f64> = rare_cols
        .iter()
        .map(|&k| (survey.columns[k].clone(), survey.known_sizes[&k] as f64 / total))
        .collect();
    let draws = fit_overdispersed(survey, priors, config)?;
    let draws = renormalize_betas(&draws, &proportions)?;
    with_unknown_sizes(&draws, survey)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayes::ChainDraws;

    fn toy_draws(beta: Vec<f64>, alpha: Vec<f64>) -> PosteriorDraws {
        let mut params: Vec<String> = (0..alpha.len()).map(|i| format!("alpha[r{i}]")).collect();
        params.extend((0..beta.len()).map(|k| format!("beta[c{k}]")));
        let values = alpha.iter().chain(&beta).map(|v| vec![*v]).collect();
        PosteriorDraws {
            model: "toy".into(),
            params,
            chains: vec![ChainDraws {
                values,
                acceptance: BTreeMap::new(),
            }],
            seed: 0,
            burn_in: 0,
            thin: 1,
            converged: None,
            decisions: Vec::new(),
        }
    }

    #[test]
    fn normalized_draws_are_a_fixed_point() {
        let p = [0.01f64, 0.03];
        let d = toy_draws(vec![p[0].ln(), p[1].ln(), -2.0], vec![1.0, 2.0]);
        let rare = BTreeMap::from([("c0".to_string(), p[0]), ("c1".to_string(), p[1])]);
        let out = renormalize_betas(&d, &rare).unwrap();
        for (a, b) in d.chains[0].values.iter().zip(&out.chains[0].values) {
            assert!((a[0] - b[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_inflation_is_removed() {
        let p = [0.01f64, 0.03];
        let shift = 2f64.ln();
        let d = toy_draws(vec![p[0].ln() + shift, p[1].ln() + shift, -2.0], vec![1.0, 2.0]);
        let rare = BTreeMap::from([("c0".to_string(), p[0]), ("c1".to_string(), p[1])]);
        let out = renormalize_betas(&d, &rare).unwrap();
        let b2 = out.pooled("beta[c2]").unwrap()[0];
        assert!((b2 - (-2.0 - shift)).abs() < 1e-12);
        let a0 = out.pooled("alpha[r0]").unwrap()[0];
        assert!((a0 - (1.0 + shift)).abs() < 1e-12);
        assert!(renormalize_betas(&d, &BTreeMap::new()).is_err());
    }

    #[test]
    fn kernel_matches_full_pmf_up_to_factorial() {
        for (y, mu, t) in [(0u32, 2.0, -1.0), (7, 3.5, 0.4), (60, 40.0, 2.0), (3, 1e-3, -30.0)] {
            let full = crate::special::neg_binomial_ln_pmf_log_excess(y, mu, t);
            let k = NbConst::new(t).kernel(y, mu) - crate::special::ln_factorial(y);
            assert!((full - k).abs() < 1e-9, "{y} {mu} {t}: {full} vs {k}");
        }
    }

    #[test]
    fn shift_leaves_likelihood_unchanged() {
        let s = crate::ard::fixtures::two_respondents();
        let alpha = [0.3, -0.2];
        let beta = [1.0, 1.5, 0.2];
        let omega = [1.0, 2.5, 1.3];
        let base = overdispersed_log_likelihood(&s, &alpha, &beta, &omega);
        let c = 0.77;
        let a2: Vec<f64> = alpha.iter().map(|a| a + c).collect();
        let b2: Vec<f64> = beta.iter().map(|b| b - c).collect();
        let moved = overdispersed_log_likelihood(&s, &a2, &b2, &omega);
        assert!((base - moved).abs() < 1e-8);
    }
}
