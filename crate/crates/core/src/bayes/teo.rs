//! Poisson model with Likert-scaled transmission and covariate barriers:
//! `y_ik ~ Poisson(λ α_i exp{β_k (x_ik - U_k)} exp{γ_k · z_i} N_k)`.
//!
//! `ln α_i ~ N(0, σ_α²)`, `ln λ`, `β_k` and `γ_{j,k}` have independent normal
//! priors, and `N_u` is uniform on `[0, N]`. Covariates are column-centered
//! before fitting. `β_k` is fixed at 0 for columns without Likert answers,
//! and cells with a missing Likert answer are skipped.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{accept, run_chains, ChainSampler, McmcConfig, PosteriorDraws, Tuning};
use crate::ard::ArdSurvey;
use crate::error::{NsumError, Result};
use crate::special::poisson_ln_pmf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TeoVariant {
    Transmission,
    TransmissionBarrier,
}

impl TeoVariant {
    pub fn label(self) -> &'static str {
        match self {
            TeoVariant::Transmission => "transmission",
            TeoVariant::TransmissionBarrier => "transmission_barrier",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeoPriors {
    pub log_lambda_sd: f64,
    pub beta_sd: f64,
    pub gamma_sd: f64,
    /// Inverse-gamma shape and scale on `σ_α²`.
    pub sigma_alpha_shape: f64,
    pub sigma_alpha_scale: f64,
}

impl Default for TeoPriors {
    fn default() -> Self {
        TeoPriors {
            log_lambda_sd: 10.0,
            beta_sd: 2.0,
            gamma_sd: 2.0,
            sigma_alpha_shape: 1.0,
            sigma_alpha_scale: 1.0,
        }
    }
}

struct Obs {
    i: usize,
    j: usize,
    y: u32,
    /// `x_ik - U_k`, zero when the column has no Likert answers.
    dx: f64,
}

/// Model data shared by the sampler and the likelihood.
struct Layout {
    used: Vec<usize>,
    has_likert: Vec<bool>,
    /// `ln N_k` per used column; the target entry is unused.
    log_known: Vec<f64>,
    obs: Vec<Obs>,
    by_row: Vec<Vec<usize>>,
    by_col: Vec<Vec<usize>>,
    z: Option<Vec<f64>>,
    width: usize,
}

impl Layout {
    fn new(survey: &ArdSurvey, unknown: usize, with_covariates: bool) -> Result<Layout> {
        survey.ensure_unknown(unknown)?;
        if survey.known_sizes.is_empty() {
            return Err(NsumError::NoKnownColumns);
        }
        if !survey.likert.contains_key(&unknown) {
            return Err(NsumError::MissingLikert(survey.columns[unknown].clone()));
        }
        let z = if with_covariates {
            let c = survey.covariates.as_ref().ok_or(NsumError::MissingCovariates)?;
            if c.width() == 0 {
                return Err(NsumError::MissingCovariates);
            }
            Some(c.column_centered())
        } else {
            None
        };
        let mut used: Vec<usize> = survey.known_sizes.keys().copied().collect();
        used.push(unknown);
        let has_likert: Vec<bool> = used.iter().map(|k| survey.likert.contains_key(k)).collect();
        let log_known = used
            .iter()
            .map(|k| survey.known_sizes.get(k).map_or(f64::NAN, |&s| (s as f64).ln()))
            .collect();
        let n = survey.n_respondents();
        let mut obs = Vec::new();
        let mut by_row = vec![Vec::new(); n];
        let mut by_col = vec![Vec::new(); used.len()];
        for i in 0..n {
            for (j, &k) in used.iter().enumerate() {
                let Some(y) = survey.get(i, k) else { continue };
                let dx = match survey.likert.get(&k) {
                    Some(l) => match l.values[i] {
                        Some(x) => x - l.upper,
                        None => continue,
                    },
                    None => 0.0,
                };
                by_row[i].push(obs.len());
                by_col[j].push(obs.len());
                obs.push(Obs { i, j, y, dx });
            }
        }
        let width = z.as_ref().map_or(0, |c| c.width());
        Ok(Layout {
            used,
            has_likert,
            log_known,
            obs,
            by_row,
            by_col,
            z: z.map(|c| c.values),
            width,
        })
    }

    fn target(&self) -> usize {
        self.used.len() - 1
    }

    fn z(&self, i: usize) -> &[f64] {
        match &self.z {
            Some(v) => &v[i * self.width..(i + 1) * self.width],
            None => &[],
        }
    }
}

#[derive(Debug, Clone)]
struct State {
    log_alpha: Vec<f64>,
    log_lambda: f64,
    /// Per used column.
    beta: Vec<f64>,
    /// Row-major, used column by covariate.
    gamma: Vec<f64>,
    log_size: f64,
    sigma2: f64,
}

impl State {
    fn eta(&self, l: &Layout, o: &Obs) -> f64 {
        let log_n = if o.j == l.target() { self.log_size } else { l.log_known[o.j] };
        let mut e = self.log_lambda + self.log_alpha[o.i] + self.beta[o.j] * o.dx + log_n;
        if l.width > 0 {
            let g = &self.gamma[o.j * l.width..(o.j + 1) * l.width];
            e += g.iter().zip(l.z(o.i)).map(|(a, b)| a * b).sum::<f64>();
        }
        e
    }
}

/// Log-likelihood at one parameter value. `beta` holds one entry per
/// survey column (ignored where there are no Likert answers) and `gamma`,
/// when covariates are used, one row of covariate effects per survey column.
#[allow(clippy::too_many_arguments)]
pub fn teo_log_likelihood(
    survey: &ArdSurvey,
    unknown: usize,
    variant: TeoVariant,
    lambda: f64,
    alpha: &[f64],
    beta: &[f64],
    gamma: &[f64],
    size: f64,
) -> Result<f64> {
    let layout = Layout::new(survey, unknown, variant == TeoVariant::TransmissionBarrier)?;
    let w = layout.width;
    let state = State {
        log_alpha: alpha.iter().map(|a| a.ln()).collect(),
        log_lambda: lambda.ln(),
        beta: layout.used.iter().map(|&k| beta[k]).collect(),
        gamma: layout.used.iter().flat_map(|&k| gamma[k * w..(k + 1) * w].iter().copied()).collect(),
        log_size: size.ln(),
        sigma2: 1.0,
    };
    Ok(layout
        .obs
        .iter()
        .map(|o| poisson_ln_pmf(o.y, state.eta(&layout, o).exp()))
        .sum())
}

struct Sampler<'a> {
    survey: &'a ArdSurvey,
    priors: &'a TeoPriors,
    layout: Layout,
    total: f64,
    record_latent: bool,
}

const ALPHA: usize = 0;
const LAMBDA: usize = 1;
const BETA: usize = 2;
const GAMMA: usize = 3;
const SIZE: usize = 4;

impl Sampler<'_> {
    /// Log-likelihood change when every `eta` of `cells` moves by
    /// `delta * scale(cell)`.
    fn shift_ll(&self, s: &State, cells: &[usize], delta: f64, scale: impl Fn(&Obs) -> f64) -> f64 {
        cells
            .iter()
            .map(|&c| {
                let o = &self.layout.obs[c];
                let d = delta * scale(o);
                let e = s.eta(&self.layout, o);
                f64::from(o.y) * d - e.exp() * d.exp_m1()
            })
            .sum()
    }
}

impl ChainSampler for Sampler<'_> {
    type State = State;

    fn param_names(&self) -> Vec<String> {
        let l = &self.layout;
        let cols = &self.survey.columns;
        let mut names = vec![format!("size[{}]", cols[l.used[l.target()]]), "lambda".into(), "sigma_alpha".into()];
        for (j, &k) in l.used.iter().enumerate() {
            if l.has_likert[j] {
                names.push(format!("beta[{}]", cols[k]));
            }
        }
        if let Some(c) = &self.survey.covariates {
            if l.width > 0 {
                for &k in &l.used {
                    for name in &c.names {
                        names.push(format!("gamma[{name},{}]", cols[k]));
                    }
                }
            }
        }
        if self.record_latent {
            names.extend(self.survey.respondent_ids.iter().map(|id| format!("alpha[{id}]")));
        }
        names
    }

    fn tuning(&self) -> Tuning {
        let l = &self.layout;
        let mut t = Tuning::default();
        t.add("alpha", l.by_row.len(), 0.3);
        t.add("lambda", 1, 0.05);
        t.add("beta", l.used.len(), 0.1);
        t.add("gamma", l.used.len() * l.width, 0.1);
        t.add("size", 1, 0.1);
        t
    }

    fn init(&self, _chain: usize, rng: &mut ChaCha8Rng) -> State {
        let l = &self.layout;
        let mut z = || rng.sample::<f64, _>(StandardNormal);
        let target = l.target();
        let row_known: Vec<f64> = l
            .by_row
            .iter()
            .map(|r| r.iter().filter(|&&c| l.obs[c].j != target).map(|&c| f64::from(l.obs[c].y)).sum())
            .collect();
        let n = row_known.len() as f64;
        let mean_row = row_known.iter().sum::<f64>() / n;
        let known_total: f64 = l.log_known[..target].iter().map(|v| v.exp()).sum();
        let log_lambda = ((mean_row + 0.5) / known_total).ln() + 0.1 * z();
        let log_alpha: Vec<f64> = row_known
            .iter()
            .map(|r| ((r + 0.5) / (mean_row + 0.5)).ln() + 0.1 * z())
            .collect();
        let y_u: f64 = l.by_col[target].iter().map(|&c| f64::from(l.obs[c].y)).sum();
        let rate_u: f64 = l.by_col[target]
            .iter()
            .map(|&c| (log_lambda + log_alpha[l.obs[c].i]).exp())
            .sum();
        let guess = ((y_u + 0.5) / rate_u.max(1e-12)).clamp(1.0, 0.5 * self.total);
        let sigma2 = log_alpha.iter().map(|a| a * a).sum::<f64>() / n + 0.1;
        State {
            log_alpha,
            log_lambda,
            beta: vec![0.0; l.used.len()],
            gamma: vec![0.0; l.used.len() * l.width],
            log_size: guess.ln() + 0.2 * z(),
            sigma2,
        }
    }

    fn sweep(&self, s: &mut State, tuning: &mut Tuning, rng: &mut ChaCha8Rng) {
        let l = &self.layout;
        let p = self.priors;

        for i in 0..l.by_row.len() {
            let a = s.log_alpha[i];
            let delta = tuning.blocks[ALPHA].step(i, rng);
            let prior = ((a + delta).powi(2) - a * a) / (2.0 * s.sigma2);
            let ok = accept(self.shift_ll(s, &l.by_row[i], delta, |_| 1.0) - prior, rng);
            if ok {
                s.log_alpha[i] += delta;
            }
            tuning.blocks[ALPHA].record(i, ok);
        }

        let all: Vec<usize> = (0..l.obs.len()).collect();
        let delta = tuning.blocks[LAMBDA].step(0, rng);
        let ll0 = s.log_lambda;
        let prior = ((ll0 + delta).powi(2) - ll0 * ll0) / (2.0 * p.log_lambda_sd.powi(2));
        let ok = accept(self.shift_ll(s, &all, delta, |_| 1.0) - prior, rng);
        if ok {
            s.log_lambda += delta;
        }
        tuning.blocks[LAMBDA].record(0, ok);

        for j in 0..l.used.len() {
            if l.has_likert[j] {
                let b = s.beta[j];
                let delta = tuning.blocks[BETA].step(j, rng);
                let prior = ((b + delta).powi(2) - b * b) / (2.0 * p.beta_sd.powi(2));
                let ok = accept(self.shift_ll(s, &l.by_col[j], delta, |o| o.dx) - prior, rng);
                if ok {
                    s.beta[j] += delta;
                }
                tuning.blocks[BETA].record(j, ok);
            }
            for c in 0..l.width {
                let site = j * l.width + c;
                let g = s.gamma[site];
                let delta = tuning.blocks[GAMMA].step(site, rng);
                let prior = ((g + delta).powi(2) - g * g) / (2.0 * p.gamma_sd.powi(2));
                let ok = accept(self.shift_ll(s, &l.by_col[j], delta, |o| l.z(o.i)[c]) - prior, rng);
                if ok {
                    s.gamma[site] += delta;
                }
                tuning.blocks[GAMMA].record(site, ok);
            }
        }

        let target = l.target();
        let delta = tuning.blocks[SIZE].step(0, rng);
        let ok = (s.log_size + delta).exp() < self.total
            && accept(self.shift_ll(s, &l.by_col[target], delta, |_| 1.0) + delta, rng);
        if ok {
            s.log_size += delta;
        }
        tuning.blocks[SIZE].record(0, ok);

        let n = s.log_alpha.len() as f64;
        let ss: f64 = s.log_alpha.iter().map(|a| a * a).sum();
        let g: f64 = Gamma::new(p.sigma_alpha_shape + 0.5 * n, 1.0 / (p.sigma_alpha_scale + 0.5 * ss))
            .expect("valid gamma")
            .sample(rng);
        s.sigma2 = 1.0 / g;

        let prec_l = 1.0 / p.log_lambda_sd.powi(2);
        let precision = prec_l + n / s.sigma2;
        let mean = (-s.log_lambda * prec_l + s.log_alpha.iter().sum::<f64>() / s.sigma2) / precision;
        let c = mean + rng.sample::<f64, _>(StandardNormal) / precision.sqrt();
        s.log_lambda += c;
        s.log_alpha.iter_mut().for_each(|a| *a -= c);
    }

    fn record(&self, s: &State, out: &mut Vec<f64>) {
        let l = &self.layout;
        out.push(s.log_size.exp());
        out.push(s.log_lambda.exp());
        out.push(s.sigma2.sqrt());
        for j in 0..l.used.len() {
            if l.has_likert[j] {
                out.push(s.beta[j]);
            }
        }
        out.extend_from_slice(&s.gamma);
        if self.record_latent {
            out.extend(s.log_alpha.iter().map(|a| a.exp()));
        }
    }
}

/// Fits the Teo model for the single target column `unknown`, which must
/// carry Likert answers.
pub fn fit_teo(
    survey: &ArdSurvey,
    unknown: usize,
    variant: TeoVariant,
    priors: &TeoPriors,
    config: &McmcConfig,
) -> Result<PosteriorDraws> {
    if survey.n_respondents() < 2 {
        return Err(NsumError::InvalidInput("the Teo model needs at least 2 respondents".into()));
    }
    if !(priors.log_lambda_sd > 0.0
        && priors.beta_sd > 0.0
        && priors.gamma_sd > 0.0
        && priors.sigma_alpha_shape > 0.0
        && priors.sigma_alpha_scale > 0.0)
    {
        return Err(NsumError::InvalidInput("prior scales must be positive".into()));
    }
    let layout = Layout::new(survey, unknown, variant == TeoVariant::TransmissionBarrier)?;
    let sampler = Sampler {
        survey,
        priors,
        layout,
        total: survey.population_total as f64,
        record_latent: config.record_latent,
    };
    let mut draws = run_chains(&sampler, &format!("teo_{}", variant.label()), config)?;
    draws.decisions.push(format!(
        "priors: ln lambda ~ N(0, {}^2), beta ~ N(0, {}^2), gamma ~ N(0, {}^2), sigma_alpha^2 ~ InvGamma({}, {})",
        priors.log_lambda_sd, priors.beta_sd, priors.gamma_sd, priors.sigma_alpha_shape, priors.sigma_alpha_scale
    ));
    draws.decisions.push("unknown size has a uniform prior on [0, N]".into());
    Ok(draws)
}
