//! Errors-in-variables recall adjustment:
//! `ln N̂_k = a + b ln N_k + δ_k + ε_k`, `δ_k ~ N(0, s_k²)` with `s_k` known,
//! `ε_k ~ N(0, σ_ε²)`. Posterior draws `Y` of `ln N_u` map to
//! `(Y − a)/b + Z`, `Z ~ N(0, σ_ε²/b²)`.

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::loo::{loo_backestimates, LooRow};
use crate::ard::ArdSurvey;
use crate::bayes::PosteriorDraws;
use crate::classic::ClassicMethod;
use crate::error::{NsumError, Result};
use crate::rng;

const MIN_SLOPE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EivFit {
    pub a: f64,
    pub b: f64,
    pub sigma_eps: f64,
    /// Known standard deviation of each back-estimate's sampling error.
    pub s_k: Vec<f64>,
    pub labels: Vec<String>,
    pub log_likelihood: f64,
}

impl EivFit {
    pub fn new(a: f64, b: f64, sigma_eps: f64) -> Result<Self> {
        if b.abs() < MIN_SLOPE {
            return Err(NsumError::DegenerateRecallSlope(b.abs()));
        }
        if !(sigma_eps >= 0.0) {
            return Err(NsumError::InvalidInput(format!("sigma_eps {sigma_eps} must be nonnegative")));
        }
        Ok(EivFit {
            a,
            b,
            sigma_eps,
            s_k: Vec::new(),
            labels: Vec::new(),
            log_likelihood: f64::NAN,
        })
    }
}

/// Weighted least squares for `(a, b)` at variances `v`, with the Gaussian
/// log-likelihood at that solution.
fn profile(x: &[f64], y: &[f64], v: &[f64]) -> (f64, f64, f64) {
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for k in 0..x.len() {
        let w = 1.0 / v[k];
        sw += w;
        sx += w * x[k];
        sy += w * y[k];
        sxx += w * x[k] * x[k];
        sxy += w * x[k] * y[k];
    }
    let b = (sw * sxy - sx * sy) / (sw * sxx - sx * sx);
    let a = (sy - b * sx) / sw;
    let ll = (0..x.len())
        .map(|k| {
            let r = y[k] - a - b * x[k];
            -0.5 * ((2.0 * std::f64::consts::PI * v[k]).ln() + r * r / v[k])
        })
        .sum();
    (a, b, ll)
}

/// Maximum-likelihood fit, profiling `σ_ε` over a grid refined by golden
/// section. `s2` holds the known variances `s_k²`, one per row.
pub fn eiv_fit(rows: &[LooRow], s2: &[f64]) -> Result<EivFit> {
    if rows.len() < 3 {
        return Err(NsumError::InvalidInput(format!(
            "errors-in-variables fit needs at least 3 known subpopulations, got {}",
            rows.len()
        )));
    }
    if s2.len() != rows.len() || s2.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(NsumError::InvalidInput("need one finite nonnegative s_k^2 per row".into()));
    }
    if rows.iter().any(|r| !(r.backestimate > 0.0 && r.backestimate.is_finite())) {
        return Err(NsumError::InvalidInput("back-estimates must be finite and positive".into()));
    }
    let x: Vec<f64> = rows.iter().map(|r| (r.known_size as f64).ln()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.backestimate.ln()).collect();
    let x_mean = x.iter().sum::<f64>() / x.len() as f64;
    if x.iter().all(|v| (v - x_mean).abs() < 1e-12) {
        return Err(NsumError::InvalidInput("known sizes are all equal; slope is not identified".into()));
    }
    let at = |sigma: f64| -> (f64, f64, f64) {
        let v: Vec<f64> = s2.iter().map(|s| (s + sigma * sigma).max(1e-300)).collect();
        profile(&x, &y, &v)
    };
    let ols = {
        let v = vec![1.0; x.len()];
        let (a, b, _) = profile(&x, &y, &v);
        (0..x.len()).map(|k| (y[k] - a - b * x[k]).powi(2)).sum::<f64>() / x.len() as f64
    };
    let hi = 3.0 * ols.sqrt() + 1.0;
    let lo = if s2.iter().all(|&v| v > 0.0) { 0.0 } else { 1e-8 };
    let grid = 400;
    let mut best = (lo, at(lo).2);
    for g in 1..=grid {
        let s = lo + (hi - lo) * f64::from(g) / f64::from(grid);
        let ll = at(s).2;
        if ll > best.1 {
            best = (s, ll);
        }
    }
    let step = (hi - lo) / f64::from(grid);
    let (mut l, mut r) = ((best.0 - step).max(lo), (best.0 + step).min(hi));
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let m1 = r - phi * (r - l);
        let m2 = l + phi * (r - l);
        if at(m1).2 < at(m2).2 {
            l = m1;
        } else {
            r = m2;
        }
    }
    let mid = 0.5 * (l + r);
    let sigma = if at(mid).2 >= best.1 { mid } else { best.0 };
    let sigma = if sigma <= 1e-8 && lo == 0.0 && at(0.0).2 >= at(sigma).2 { 0.0 } else { sigma };
    let (a, b, ll) = at(sigma);
    if b.abs() < MIN_SLOPE {
        return Err(NsumError::DegenerateRecallSlope(b.abs()));
    }
    Ok(EivFit {
        a,
        b,
        sigma_eps: sigma,
        s_k: s2.iter().map(|v| v.sqrt()).collect(),
        labels: rows.iter().map(|r| r.subpop.clone()).collect(),
        log_likelihood: ll,
    })
}

/// Bootstrap variance of each fold's `ln N̂_k`, resampling respondents.
pub fn loo_bootstrap_variances(
    survey: &ArdSurvey,
    method: ClassicMethod,
    replicates: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if replicates < 2 {
        return Err(NsumError::InvalidInput("bootstrap needs at least 2 replicates".into()));
    }
    let n = survey.n_respondents();
    let rows: Vec<usize> = (0..n).collect();
    let logs: Vec<Vec<f64>> = (0..replicates)
        .into_par_iter()
        .filter_map(|r| {
            let mut g = rng::stream(seed, &[0x626f6f74, r as u64]);
            let pick: Vec<usize> = (0..n).map(|_| *rows.choose(&mut g).expect("rows")).collect();
            let folds = loo_backestimates(&survey.select_rows(&pick), method).ok()?;
            let logs: Vec<f64> = folds.iter().map(|f| f.backestimate.ln()).collect();
            logs.iter().all(|v| v.is_finite()).then_some(logs)
        })
        .collect();
    if logs.len() < 2 {
        return Err(NsumError::InvalidInput(
            "fewer than 2 bootstrap replicates produced finite back-estimates".into(),
        ));
    }
    let folds = logs[0].len();
    let m = logs.len() as f64;
    Ok((0..folds)
        .map(|k| {
            let mean = logs.iter().map(|l| l[k]).sum::<f64>() / m;
            logs.iter().map(|l| (l[k] - mean).powi(2)).sum::<f64>() / (m - 1.0)
        })
        .collect())
}

/// Transforms draws of `ln N_u`. Noise comes from a stream seeded by `seed`;
/// with `σ_ε = 0` the map is deterministic and affine.
pub fn eiv_recall_adjust(fit: &EivFit, log_draws: &[f64], seed: u64) -> Result<Vec<f64>> {
    if fit.b.abs() < MIN_SLOPE {
        return Err(NsumError::DegenerateRecallSlope(fit.b.abs()));
    }
    let sd = fit.sigma_eps / fit.b.abs();
    let mut g = rng::stream(seed, &[0x656976]);
    Ok(log_draws
        .iter()
        .map(|&y| {
            let shifted = (y - fit.a) / fit.b;
            if sd > 0.0 {
                shifted + sd * g.sample::<f64, _>(StandardNormal)
            } else {
                shifted
            }
        })
        .collect())
}

/// Applies [`eiv_recall_adjust`] to the `size[unknown]` draws in place of
/// the originals.
pub fn eiv_adjust_draws(draws: &PosteriorDraws, unknown: &str, fit: &EivFit, seed: u64) -> Result<PosteriorDraws> {
    let name = format!("size[{unknown}]");
    let p = draws.param_index(&name).ok_or(NsumError::MissingParameter(name))?;
    let mut out = draws.clone();
    for (c, chain) in out.chains.iter_mut().enumerate() {
        let logs: Vec<f64> = chain.values[p].iter().map(|v| v.ln()).collect();
        let adjusted = eiv_recall_adjust(fit, &logs, rng::derive_seed(seed, &[c as u64]))?;
        for ((v, &old), &new) in chain.values[p].iter_mut().zip(&logs).zip(&adjusted) {
            if new != old {
                *v = new.exp();
            }
        }
    }
    out.decisions.push(format!(
        "errors-in-variables recall adjustment a={}, b={}, sigma_eps={}",
        fit.a, fit.b, fit.sigma_eps
    ));
    Ok(out)
}
