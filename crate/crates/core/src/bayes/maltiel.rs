//! Binomial models with random degrees: `y_ik ~ Binom(d_i, τ_k q_ik)` with
//! `d_i ~ LogNormal(μ, σ²)`.
//!
//! Degrees are positive reals inside a gamma-function binomial. The barrier
//! effect `q_ik ~ Beta(mean m_k, dispersion ρ_k)` is integrated out, giving a
//! beta-binomial cell likelihood. Transmission `τ_u` applies to the target
//! column only and is fixed at 1 elsewhere. `m_u = N_u / N` carries the
//! unknown size.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{accept, run_chains, ChainSampler, McmcConfig, PosteriorDraws, Tuning};
use crate::ard::ArdSurvey;
use crate::error::{NsumError, Result};
use crate::special::{beta_binomial_ln_pmf, beta_ln_pdf, beta_shapes, binomial_ln_pmf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaltielVariant {
    RandomDegree,
    Barrier,
    Transmission,
    Combined,
}

impl MaltielVariant {
    pub fn label(self) -> &'static str {
        match self {
            MaltielVariant::RandomDegree => "random_degree",
            MaltielVariant::Barrier => "barrier",
            MaltielVariant::Transmission => "transmission",
            MaltielVariant::Combined => "combined",
        }
    }

    fn has_barrier(self) -> bool {
        matches!(self, MaltielVariant::Barrier | MaltielVariant::Combined)
    }

    fn has_transmission(self) -> bool {
        matches!(self, MaltielVariant::Transmission | MaltielVariant::Combined)
    }
}

/// A Beta distribution given by mean and dispersion in (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaMeanDispersion {
    pub mean: f64,
    pub dispersion: f64,
}

impl BetaMeanDispersion {
    pub fn shapes(self) -> Result<(f64, f64)> {
        if !(self.mean > 0.0 && self.mean < 1.0 && self.dispersion > 0.0 && self.dispersion < 1.0) {
            return Err(NsumError::InvalidInput(format!(
                "beta mean {} and dispersion {} must both lie in (0, 1)",
                self.mean, self.dispersion
            )));
        }
        Ok(beta_shapes(self.mean, self.dispersion))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BarrierPrior {
    /// `ρ_k ~ Uniform(0, 1)`, sampled per column.
    Uniform,
    /// `ρ_k` held at the given value for every column.
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaltielPriors {
    /// Inverse-gamma shape and scale on `σ²`; `μ` has a flat prior.
    pub sigma2_shape: f64,
    pub sigma2_scale: f64,
    /// Upper end of the uniform prior on `N_u`; `None` means `N`.
    pub size_upper: Option<f64>,
    pub barrier: BarrierPrior,
}

impl Default for MaltielPriors {
    fn default() -> Self {
        MaltielPriors {
            sigma2_shape: 1.0,
            sigma2_scale: 1.0,
            size_upper: None,
            barrier: BarrierPrior::Uniform,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Cell {
    Binomial { ln_p: f64, ln_1mp: f64 },
    BetaBinomial { a: f64, b: f64 },
}

impl Cell {
    fn new(mean: f64, rho: Option<f64>) -> Cell {
        match rho {
            Some(r) => {
                let (a, b) = beta_shapes(mean, r);
                Cell::BetaBinomial { a, b }
            }
            None => Cell::Binomial {
                ln_p: mean.ln(),
                ln_1mp: (-mean).ln_1p(),
            },
        }
    }

    #[inline]
    fn ln_pmf(self, y: u32, d: f64) -> f64 {
        match self {
            Cell::Binomial { ln_p, ln_1mp } => binomial_ln_pmf(y, d, ln_p, ln_1mp),
            Cell::BetaBinomial { a, b } => beta_binomial_ln_pmf(y, d, a, b),
        }
    }
}

/// Log-likelihood with `q` integrated out. `rho` holds one dispersion per
/// used column (known columns in index order, then the target) and is
/// ignored by variants without a barrier.
pub fn maltiel_log_likelihood(
    survey: &ArdSurvey,
    unknown: usize,
    variant: MaltielVariant,
    degrees: &[f64],
    size: f64,
    tau: f64,
    rho: &[f64],
) -> Result<f64> {
    survey.ensure_unknown(unknown)?;
    let used = used_columns(survey, unknown);
    let total = survey.population_total as f64;
    let cells: Vec<Cell> = used
        .iter()
        .enumerate()
        .map(|(j, &k)| {
            let mean = if k == unknown {
                let t = if variant.has_transmission() { tau } else { 1.0 };
                t * size / total
            } else {
                survey.known_sizes[&k] as f64 / total
            };
            Cell::new(mean, variant.has_barrier().then(|| rho[j]))
        })
        .collect();
    let mut ll = 0.0;
    for (i, &d) in degrees.iter().enumerate() {
        for (j, &k) in used.iter().enumerate() {
            if let Some(y) = survey.get(i, k) {
                ll += cells[j].ln_pmf(y, d);
            }
        }
    }
    Ok(ll)
}

fn used_columns(survey: &ArdSurvey, unknown: usize) -> Vec<usize> {
    let mut used: Vec<usize> = survey.known_sizes.keys().copied().collect();
    used.push(unknown);
    used
}

struct Sampler<'a> {
    survey: &'a ArdSurvey,
    variant: MaltielVariant,
    priors: &'a MaltielPriors,
    tau_shapes: Option<(f64, f64)>,
    /// Survey columns in model order; the target is last.
    used: Vec<usize>,
    /// Known `N_k / N` per used column; the target entry is unused.
    known_mean: Vec<f64>,
    rows: Vec<Vec<(usize, u32)>>,
    cols: Vec<Vec<(usize, u32)>>,
    max_y: Vec<f64>,
    total: f64,
    upper: f64,
    record_latent: bool,
}

struct State {
    log_d: Vec<f64>,
    mu: f64,
    sigma2: f64,
    log_size: f64,
    tau: f64,
    rho: Vec<f64>,
}

const DEGREE_BLOCK: usize = 0;
const SIZE_BLOCK: usize = 1;
const TAU_BLOCK: usize = 2;
const RIDGE_BLOCK: usize = 3;
const RHO_BLOCK: usize = 4;

impl Sampler<'_> {
    fn target(&self) -> usize {
        self.used.len() - 1
    }

    fn sampled_rho(&self) -> bool {
        self.variant.has_barrier() && matches!(self.priors.barrier, BarrierPrior::Uniform)
    }

    fn cell(&self, j: usize, log_size: f64, tau: f64, rho: f64) -> Cell {
        let mean = if j == self.target() {
            tau * log_size.exp() / self.total
        } else {
            self.known_mean[j]
        };
        Cell::new(mean, self.variant.has_barrier().then_some(rho))
    }

    fn cells(&self, s: &State) -> Vec<Cell> {
        (0..self.used.len())
            .map(|j| self.cell(j, s.log_size, s.tau, s.rho[j]))
            .collect()
    }

    fn column_ll(&self, j: usize, s: &State, cell: Cell) -> f64 {
        self.cols[j].iter().map(|&(i, y)| cell.ln_pmf(y, s.log_d[i].exp())).sum()
    }

    fn size_ok(&self, log_size: f64, tau: f64) -> bool {
        let n = log_size.exp();
        n < self.upper && tau * n < self.total
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn expit(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl ChainSampler for Sampler<'_> {
    type State = State;

    fn param_names(&self) -> Vec<String> {
        let target = &self.survey.columns[*self.used.last().expect("target column")];
        let mut names = vec![format!("size[{target}]"), "mu".into(), "sigma".into()];
        if self.variant.has_transmission() {
            names.push(format!("tau[{target}]"));
        }
        if self.sampled_rho() {
            names.extend(self.used.iter().map(|&k| format!("rho[{}]", self.survey.columns[k])));
        }
        if self.record_latent {
            names.extend(self.survey.respondent_ids.iter().map(|id| format!("d[{id}]")));
        }
        names
    }

    fn tuning(&self) -> Tuning {
        let mut t = Tuning::default();
        t.add("degree", self.rows.len(), 0.3);
        t.add("size", 1, 0.1);
        t.add("tau", 1, 0.3);
        t.add("tau_size_ridge", 1, 0.3);
        t.add("rho", self.used.len(), 0.3);
        t
    }

    fn init(&self, _chain: usize, rng: &mut ChaCha8Rng) -> State {
        let mut z = || rng.sample::<f64, _>(StandardNormal);
        let known_mass: f64 = self.known_mean[..self.target()].iter().sum();
        let target = self.target();
        let log_d: Vec<f64> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let known: f64 = r.iter().filter(|&&(j, _)| j != target).map(|&(_, y)| f64::from(y)).sum();
                let d = ((known + 1.0) / known_mass).max(self.max_y[i] + 1.0);
                d.ln() + 0.1 * z().abs()
            })
            .collect();
        let n = log_d.len() as f64;
        let mu = log_d.iter().sum::<f64>() / n;
        let sigma2 = log_d.iter().map(|l| (l - mu) * (l - mu)).sum::<f64>() / n + 0.05;
        let tau = self
            .tau_shapes
            .filter(|_| self.variant.has_transmission())
            .map_or(1.0, |(a, b)| a / (a + b));
        let y_sum: f64 = self.cols[target].iter().map(|&(_, y)| f64::from(y)).sum();
        let d_sum: f64 = self.cols[target].iter().map(|&(i, _)| log_d[i].exp()).sum();
        let guess = (self.total * (y_sum + 0.5) / d_sum.max(1.0) / tau)
            .clamp(1.0, 0.5 * self.upper.min(self.total / tau));
        let log_size = guess.ln() + 0.2 * z();
        let rho = match self.priors.barrier {
            BarrierPrior::Fixed(r) => vec![r; self.used.len()],
            BarrierPrior::Uniform => (0..self.used.len()).map(|_| 0.02 * (0.3 * z()).exp()).collect(),
        };
        let mut s = State {
            log_d,
            mu,
            sigma2,
            log_size,
            tau,
            rho,
        };
        while !self.size_ok(s.log_size, s.tau) {
            s.log_size -= 0.1;
        }
        s
    }

    fn sweep(&self, s: &mut State, tuning: &mut Tuning, rng: &mut ChaCha8Rng) {
        let target = self.target();
        let cells = self.cells(s);
        for i in 0..self.rows.len() {
            let l = s.log_d[i];
            let prop = l + tuning.blocks[DEGREE_BLOCK].step(i, rng);
            let ok = prop.exp() >= self.max_y[i] && {
                let ll = |x: f64| -> f64 {
                    let d = x.exp();
                    self.rows[i].iter().map(|&(j, y)| cells[j].ln_pmf(y, d)).sum::<f64>()
                        - (x - s.mu) * (x - s.mu) / (2.0 * s.sigma2)
                };
                accept(ll(prop) - ll(l), rng)
            };
            if ok {
                s.log_d[i] = prop;
            }
            tuning.blocks[DEGREE_BLOCK].record(i, ok);
        }

        let n = s.log_d.len() as f64;
        let mean_l = s.log_d.iter().sum::<f64>() / n;
        s.mu = mean_l + (s.sigma2 / n).sqrt() * rng.sample::<f64, _>(StandardNormal);
        let ss: f64 = s.log_d.iter().map(|l| (l - s.mu) * (l - s.mu)).sum();
        let g: f64 = Gamma::new(self.priors.sigma2_shape + 0.5 * n, 1.0 / (self.priors.sigma2_scale + 0.5 * ss))
            .expect("valid gamma")
            .sample(rng);
        s.sigma2 = 1.0 / g;

        let rho_u = s.rho[target];
        let cur_ll = self.column_ll(target, s, self.cell(target, s.log_size, s.tau, rho_u));
        let prop = s.log_size + tuning.blocks[SIZE_BLOCK].step(0, rng);
        let mut cur_ll = cur_ll;
        let ok = self.size_ok(prop, s.tau) && {
            let new_ll = self.column_ll(target, s, self.cell(target, prop, s.tau, rho_u));
            let ok = accept(new_ll - cur_ll + prop - s.log_size, rng);
            if ok {
                cur_ll = new_ll;
            }
            ok
        };
        if ok {
            s.log_size = prop;
        }
        tuning.blocks[SIZE_BLOCK].record(0, ok);

        if let (true, Some((a, b))) = (self.variant.has_transmission(), self.tau_shapes) {
            let x = logit(s.tau);
            let xp = x + tuning.blocks[TAU_BLOCK].step(0, rng);
            let tp = expit(xp);
            let ok = tp > 0.0 && tp < 1.0 && self.size_ok(s.log_size, tp) && {
                let new_ll = self.column_ll(target, s, self.cell(target, s.log_size, tp, rho_u));
                let lj = |t: f64| beta_ln_pdf(t, a, b) + t.ln() + (-t).ln_1p();
                let ok = accept(new_ll - cur_ll + lj(tp) - lj(s.tau), rng);
                if ok {
                    cur_ll = new_ll;
                }
                ok
            };
            if ok {
                s.tau = tp;
            }
            tuning.blocks[TAU_BLOCK].record(0, ok);

            let shift = tuning.blocks[RIDGE_BLOCK].step(0, rng);
            let tp = s.tau * shift.exp();
            let lp = s.log_size - shift;
            let ok = tp < 1.0 && self.size_ok(lp, tp) && {
                let new_ll = self.column_ll(target, s, self.cell(target, lp, tp, rho_u));
                accept(new_ll - cur_ll + beta_ln_pdf(tp, a, b) - beta_ln_pdf(s.tau, a, b), rng)
            };
            if ok {
                s.tau = tp;
                s.log_size = lp;
            }
            tuning.blocks[RIDGE_BLOCK].record(0, ok);
        }

        if self.sampled_rho() {
            for j in 0..self.used.len() {
                let r = s.rho[j];
                let rp = expit(logit(r) + tuning.blocks[RHO_BLOCK].step(j, rng));
                let ok = rp > 0.0 && rp < 1.0 && {
                    let old = self.column_ll(j, s, self.cell(j, s.log_size, s.tau, r));
                    let new = self.column_ll(j, s, self.cell(j, s.log_size, s.tau, rp));
                    let lj = |p: f64| p.ln() + (-p).ln_1p();
                    accept(new - old + lj(rp) - lj(r), rng)
                };
                if ok {
                    s.rho[j] = rp;
                }
                tuning.blocks[RHO_BLOCK].record(j, ok);
            }
        }
    }

    fn record(&self, s: &State, out: &mut Vec<f64>) {
        out.push(s.log_size.exp());
        out.push(s.mu);
        out.push(s.sigma2.sqrt());
        if self.variant.has_transmission() {
            out.push(s.tau);
        }
        if self.sampled_rho() {
            out.extend_from_slice(&s.rho);
        }
        if self.record_latent {
            out.extend(s.log_d.iter().map(|l| l.exp()));
        }
    }
}

/// Fits one Maltiel variant for the single target column `unknown`, using
/// every known column. Other unknown columns are ignored.
pub fn fit_maltiel(
    survey: &ArdSurvey,
    unknown: usize,
    variant: MaltielVariant,
    priors: &MaltielPriors,
    transmission_prior: Option<BetaMeanDispersion>,
    config: &McmcConfig,
) -> Result<PosteriorDraws> {
    survey.ensure_unknown(unknown)?;
    if survey.known_sizes.is_empty() {
        return Err(NsumError::NoKnownColumns);
    }
    if survey.n_respondents() < 2 {
        return Err(NsumError::InvalidInput("random-degree models need at least 2 respondents".into()));
    }
    let tau_shapes = match (variant.has_transmission(), transmission_prior) {
        (true, None) => return Err(NsumError::MissingTransmissionPrior),
        (true, Some(p)) => Some(p.shapes()?),
        (false, _) => None,
    };
    if let BarrierPrior::Fixed(r) = priors.barrier {
        if !(r > 0.0 && r < 1.0) {
            return Err(NsumError::InvalidInput(format!("fixed barrier dispersion {r} outside (0, 1)")));
        }
    }
    if !(priors.sigma2_shape > 0.0 && priors.sigma2_scale > 0.0) {
        return Err(NsumError::InvalidInput("prior scales must be positive".into()));
    }
    let total = survey.population_total as f64;
    let upper = priors.size_upper.unwrap_or(total);
    if !(upper > 0.0 && upper <= total) {
        return Err(NsumError::InvalidInput(format!("size prior upper bound {upper} outside (0, N]")));
    }
    let used = used_columns(survey, unknown);
    let known_mean: Vec<f64> = used
        .iter()
        .map(|k| survey.known_sizes.get(k).map_or(f64::NAN, |&s| s as f64 / total))
        .collect();
    let n = survey.n_respondents();
    let mut rows = vec![Vec::new(); n];
    let mut cols = vec![Vec::new(); used.len()];
    let mut max_y = vec![0.0f64; n];
    for i in 0..n {
        for (j, &k) in used.iter().enumerate() {
            if let Some(y) = survey.get(i, k) {
                rows[i].push((j, y));
                cols[j].push((i, y));
                max_y[i] = max_y[i].max(f64::from(y));
            }
        }
    }
    let sampler = Sampler {
        survey,
        variant,
        priors,
        tau_shapes,
        used,
        known_mean,
        rows,
        cols,
        max_y,
        total,
        upper,
        record_latent: config.record_latent,
    };
    let mut draws = run_chains(&sampler, &format!("maltiel_{}", variant.label()), config)?;
    draws.decisions.push("degrees are continuous inside a gamma-function binomial".into());
    draws.decisions.push(format!("unknown size has a uniform prior on [0, {upper}]"));
    if variant.has_barrier() {
        draws.decisions.push("barrier effect integrated out as a beta-binomial".into());
    }
    if variant == MaltielVariant::Combined {
        draws
            .decisions
            .push("combined variant: target column beta mean is tau * N_u / N".into());
    }
    Ok(draws)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transmission_variants_require_a_prior() {
        let s = crate::ard::fixtures::two_respondents();
        let c = McmcConfig {
            chains: 1,
            burn_in: 10,
            keep: 10,
            ..McmcConfig::default()
        };
        for v in [MaltielVariant::Transmission, MaltielVariant::Combined] {
            let err = fit_maltiel(&s, 2, v, &MaltielPriors::default(), None, &c).unwrap_err();
            assert!(matches!(err, NsumError::MissingTransmissionPrior));
        }
        assert!(fit_maltiel(&s, 0, MaltielVariant::RandomDegree, &MaltielPriors::default(), None, &c).is_err());
    }

    #[test]
    fn tight_barrier_approaches_binomial_likelihood() {
        let s = crate::ard::fixtures::two_respondents();
        let d = [120.0, 180.5];
        let binom = maltiel_log_likelihood(&s, 2, MaltielVariant::RandomDegree, &d, 30.0, 1.0, &[]).unwrap();
        let bb = maltiel_log_likelihood(&s, 2, MaltielVariant::Barrier, &d, 30.0, 1.0, &[1e-9; 3]).unwrap();
        assert!((binom - bb).abs() < 1e-4, "{binom} {bb}");
    }

    #[test]
    fn transmission_and_size_trade_off_exactly() {
        let s = crate::ard::fixtures::two_respondents();
        let d = [120.0, 180.5];
        let a = maltiel_log_likelihood(&s, 2, MaltielVariant::Transmission, &d, 30.0, 0.5, &[]).unwrap();
        let b = maltiel_log_likelihood(&s, 2, MaltielVariant::Transmission, &d, 60.0, 0.25, &[]).unwrap();
        let c = maltiel_log_likelihood(&s, 2, MaltielVariant::RandomDegree, &d, 15.0, 1.0, &[]).unwrap();
        assert!((a - b).abs() < 1e-10);
        assert!((a - c).abs() < 1e-10);
    }
}
