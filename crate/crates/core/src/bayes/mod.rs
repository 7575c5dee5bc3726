//! Hierarchical Bayesian ARD models and the MCMC machinery they share.
//!
//! Every model is fitted by single-site random-walk Metropolis within Gibbs.
//! Proposal scales adapt per site during burn-in only and are frozen for the
//! kept draws. Chains run in parallel, each on its own seeded stream, and are
//! merged by chain index.

mod diagnostics;
mod io;
mod maltiel;
mod overdispersed;
mod summary;
mod teo;

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{NsumError, Result};
use crate::rng;

pub use diagnostics::{diagnostics, effective_sample_size, split_rhat, ChainDiagnostics, ParamDiagnostics};
pub use io::{parse_draws_csv, read_draws_csv, render_draws_csv, write_draws_csv, DrawsManifest};
pub use maltiel::{fit_maltiel, maltiel_log_likelihood, BarrierPrior, BetaMeanDispersion, MaltielPriors, MaltielVariant};
pub use overdispersed::{
    fit_overdispersed, fit_zheng, overdispersed_log_likelihood, renormalize_betas, with_unknown_sizes,
    OverdispersedPriors,
};
pub use summary::posterior_size;
pub use teo::{fit_teo, teo_log_likelihood, TeoPriors, TeoVariant};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    pub chains: usize,
    pub burn_in: usize,
    pub keep: usize,
    pub thin: usize,
    pub seed: u64,
    /// Target acceptance band for every Metropolis block during adaptation.
    pub acceptance_band: (f64, f64),
    /// Iterations between proposal-scale updates during burn-in.
    pub adapt_interval: usize,
    /// Runs whose worst split R-hat exceeds this are flagged as unconverged.
    pub rhat_threshold: f64,
    /// Record per-respondent latent parameters (degrees, random effects).
    pub record_latent: bool,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            chains: 4,
            burn_in: 2000,
            keep: 2000,
            thin: 1,
            seed: 20_240_601,
            acceptance_band: (0.2, 0.5),
            adapt_interval: 50,
            rhat_threshold: 1.1,
            record_latent: true,
        }
    }
}

impl McmcConfig {
    fn check(&self) -> Result<()> {
        if self.chains == 0 || self.keep == 0 || self.thin == 0 || self.adapt_interval == 0 {
            return Err(NsumError::InvalidInput(
                "chains, keep, thin and adapt_interval must be positive".into(),
            ));
        }
        let (lo, hi) = self.acceptance_band;
        if !(0.0 < lo && lo < hi && hi < 1.0) {
            return Err(NsumError::InvalidInput(format!("bad acceptance band ({lo}, {hi})")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDraws {
    /// `values[p][t]`: kept draw `t` of parameter `p`.
    pub values: Vec<Vec<f64>>,
    /// Post-burn-in acceptance rate per Metropolis block; blocks that made no
    /// proposals are left out.
    pub acceptance: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDraws {
    pub model: String,
    pub params: Vec<String>,
    pub chains: Vec<ChainDraws>,
    pub seed: u64,
    pub burn_in: usize,
    pub thin: usize,
    /// `Some(false)` when the worst split R-hat exceeded the configured threshold.
    pub converged: Option<bool>,
    #[serde(default)]
    pub decisions: Vec<String>,
}

impl PosteriorDraws {
    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p == name)
    }

    pub fn kept_per_chain(&self) -> usize {
        self.chains.first().and_then(|c| c.values.first()).map_or(0, Vec::len)
    }

    pub fn total_draws(&self) -> usize {
        self.kept_per_chain() * self.chains.len()
    }

    pub fn chains_of(&self, name: &str) -> Option<Vec<&[f64]>> {
        let p = self.param_index(name)?;
        Some(self.chains.iter().map(|c| c.values[p].as_slice()).collect())
    }

    pub fn pooled(&self, name: &str) -> Option<Vec<f64>> {
        Some(self.chains_of(name)?.concat())
    }

    /// Values of every parameter at one draw.
    pub fn draw(&self, chain: usize, t: usize) -> Vec<f64> {
        self.chains[chain].values.iter().map(|v| v[t]).collect()
    }

    /// Appends a derived parameter computed from each draw.
    pub fn push_derived(&mut self, name: impl Into<String>, f: impl Fn(&[f64]) -> f64) {
        let t_len = self.kept_per_chain();
        for chain in &mut self.chains {
            let mut out = Vec::with_capacity(t_len);
            let mut buf = vec![0.0; chain.values.len()];
            for t in 0..t_len {
                for (b, v) in buf.iter_mut().zip(&chain.values) {
                    *b = v[t];
                }
                out.push(f(&buf));
            }
            chain.values.push(out);
        }
        self.params.push(name.into());
    }
}

/// Adaptive random-walk scales for one group of parameters, one scale per site.
#[derive(Debug, Clone)]
pub(crate) struct Block {
    pub name: String,
    scales: Vec<f64>,
    batch_acc: Vec<u32>,
    batch_prop: Vec<u32>,
    accepted: u64,
    proposed: u64,
}

impl Block {
    fn new(name: &str, sites: usize, initial_scale: f64) -> Self {
        Block {
            name: name.to_string(),
            scales: vec![initial_scale; sites],
            batch_acc: vec![0; sites],
            batch_prop: vec![0; sites],
            accepted: 0,
            proposed: 0,
        }
    }

    /// Draws a proposal increment for `site`.
    pub fn step(&self, site: usize, rng: &mut ChaCha8Rng) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        self.scales[site] * z
    }

    pub fn record(&mut self, site: usize, accepted: bool) {
        self.batch_prop[site] += 1;
        self.proposed += 1;
        if accepted {
            self.batch_acc[site] += 1;
            self.accepted += 1;
        }
    }

    fn adapt(&mut self, band: (f64, f64)) {
        let target = 0.5 * (band.0 + band.1);
        for s in 0..self.scales.len() {
            if self.batch_prop[s] == 0 {
                continue;
            }
            let rate = f64::from(self.batch_acc[s]) / f64::from(self.batch_prop[s]);
            if rate < band.0 || rate > band.1 {
                self.scales[s] *= (2.0 * (rate - target)).exp();
            } else {
                self.scales[s] *= (0.5 * (rate - target)).exp();
            }
            self.scales[s] = self.scales[s].clamp(1e-6, 1e3);
            self.batch_acc[s] = 0;
            self.batch_prop[s] = 0;
        }
    }

    fn reset_counts(&mut self) {
        self.accepted = 0;
        self.proposed = 0;
        self.batch_acc.iter_mut().for_each(|a| *a = 0);
        self.batch_prop.iter_mut().for_each(|a| *a = 0);
    }

    fn rate(&self) -> Option<f64> {
        (self.proposed > 0).then(|| self.accepted as f64 / self.proposed as f64)
    }
}

#[derive(Debug, Clone, Default)]
pub(crate) struct Tuning {
    pub blocks: Vec<Block>,
}

impl Tuning {
    pub fn add(&mut self, name: &str, sites: usize, initial_scale: f64) -> usize {
        self.blocks.push(Block::new(name, sites, initial_scale));
        self.blocks.len() - 1
    }
}

/// Metropolis accept step on a log-density difference.
pub(crate) fn accept(log_ratio: f64, rng: &mut ChaCha8Rng) -> bool {
    if log_ratio.is_nan() {
        return false;
    }
    log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio
}

/// One model's Gibbs sweep, as run by [`run_chains`].
pub(crate) trait ChainSampler: Sync {
    type State: Send;

    fn param_names(&self) -> Vec<String>;
    fn tuning(&self) -> Tuning;
    fn init(&self, chain: usize, rng: &mut ChaCha8Rng) -> Self::State;
    fn sweep(&self, state: &mut Self::State, tuning: &mut Tuning, rng: &mut ChaCha8Rng);
    fn record(&self, state: &Self::State, out: &mut Vec<f64>);
}

pub(crate) fn run_chains<S: ChainSampler>(sampler: &S, model: &str, config: &McmcConfig) -> Result<PosteriorDraws> {
    config.check()?;
    let params = sampler.param_names();
    let chains: Vec<ChainDraws> = (0..config.chains)
        .into_par_iter()
        .map(|c| {
            let mut rng = rng::stream(config.seed, &[0x6d636d63, c as u64]);
            let mut tuning = sampler.tuning();
            let mut state = sampler.init(c, &mut rng);
            for it in 0..config.burn_in {
                sampler.sweep(&mut state, &mut tuning, &mut rng);
                if (it + 1) % config.adapt_interval == 0 {
                    tuning.blocks.iter_mut().for_each(|b| b.adapt(config.acceptance_band));
                }
            }
            tuning.blocks.iter_mut().for_each(Block::reset_counts);
            let mut values = vec![Vec::with_capacity(config.keep); params.len()];
            let mut buf = Vec::with_capacity(params.len());
            for _ in 0..config.keep {
                for _ in 0..config.thin {
                    sampler.sweep(&mut state, &mut tuning, &mut rng);
                }
                buf.clear();
                sampler.record(&state, &mut buf);
                for (v, &x) in values.iter_mut().zip(&buf) {
                    v.push(x);
                }
            }
            ChainDraws {
                values,
                acceptance: tuning.blocks.iter().filter_map(|b| Some((b.name.clone(), b.rate()?))).collect(),
            }
        })
        .collect();
    let mut draws = PosteriorDraws {
        model: model.to_string(),
        params,
        chains,
        seed: config.seed,
        burn_in: config.burn_in,
        thin: config.thin,
        converged: None,
        decisions: Vec::new(),
    };
    if config.chains >= 2 {
        let worst = diagnostics(&draws)
            .params
            .iter()
            .filter_map(|p| p.rhat)
            .fold(1.0f64, f64::max);
        draws.converged = Some(worst < config.rhat_threshold);
    }
    Ok(draws)
}
