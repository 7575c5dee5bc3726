//! Log-densities with real-valued trial counts, as needed when degrees are
//! continuous.

use std::sync::OnceLock;

use statrs::function::gamma::ln_gamma;

/// `ln Γ(x + y) - ln Γ(x)` for a nonnegative integer `y`; exact product form
/// for short runs, which stays accurate when `x` is huge.
pub fn lgamma_rising(x: f64, y: u32) -> f64 {
    if y <= 40 || x > 1e7 {
        let (mut acc, mut prod) = (0.0, 1.0);
        for j in 0..y {
            prod *= x + f64::from(j);
            if !(1e-200..=1e200).contains(&prod) {
                acc += prod.ln();
                prod = 1.0;
            }
        }
        acc + prod.ln()
    } else {
        ln_gamma(x + f64::from(y)) - ln_gamma(x)
    }
}

const FACTORIAL_TABLE: usize = 1024;

pub fn ln_factorial(y: u32) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| (0..FACTORIAL_TABLE).map(|v| ln_gamma(v as f64 + 1.0)).collect());
    table
        .get(y as usize)
        .copied()
        .unwrap_or_else(|| ln_gamma(f64::from(y) + 1.0))
}

/// Binomial log-pmf with a real trial count `d >= y`; `-inf` otherwise.
pub fn binomial_ln_pmf(y: u32, d: f64, ln_p: f64, ln_1mp: f64) -> f64 {
    let yf = f64::from(y);
    if d < yf {
        return f64::NEG_INFINITY;
    }
    let mut v = lgamma_rising(d - yf + 1.0, y) - ln_factorial(y);
    if y > 0 {
        v += yf * ln_p;
    }
    if d > yf {
        v += (d - yf) * ln_1mp;
    }
    v
}

/// Beta-binomial log-pmf with real trial count `d >= y` and shapes `a, b`.
pub fn beta_binomial_ln_pmf(y: u32, d: f64, a: f64, b: f64) -> f64 {
    let yf = f64::from(y);
    if d < yf {
        return f64::NEG_INFINITY;
    }
    let rest = d - yf;
    ln_gamma(d + 1.0) - ln_gamma(rest + 1.0) - ln_factorial(y) + lgamma_rising(a, y)
        + (ln_gamma(rest + b) - ln_gamma(b))
        - (ln_gamma(d + a + b) - ln_gamma(a + b))
}

/// Negative binomial with mean `mu` and variance `omega * mu` (`omega >= 1`).
/// `omega == 1` is the Poisson limit.
pub fn neg_binomial_ln_pmf(y: u32, mu: f64, omega: f64) -> f64 {
    let excess = omega - 1.0;
    if excess <= 0.0 {
        return poisson_ln_pmf(y, mu);
    }
    neg_binomial_ln_pmf_log_excess(y, mu, excess.ln())
}

/// Same as [`neg_binomial_ln_pmf`] with `omega = 1 + exp(log_excess)`, stable
/// far into the Poisson limit.
pub fn neg_binomial_ln_pmf_log_excess(y: u32, mu: f64, log_excess: f64) -> f64 {
    let yf = f64::from(y);
    let size = mu * (-log_excess).exp();
    // ln(omega) = ln(1 + e^t); ln((omega - 1) / omega) = t - ln(1 + e^t).
    let ln_omega = log1p_exp(log_excess);
    lgamma_rising(size, y) - ln_factorial(y) - size * ln_omega + yf * (log_excess - ln_omega)
}

pub fn poisson_ln_pmf(y: u32, rate: f64) -> f64 {
    let yf = f64::from(y);
    if rate <= 0.0 {
        return if y == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    yf * rate.ln() - rate - ln_factorial(y)
}

pub fn log1p_exp(x: f64) -> f64 {
    if x > 35.0 {
        x
    } else if x < -35.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

/// Standard shapes `(a, b)` of a Beta with the given mean and dispersion
/// `rho in (0, 1)`: `a = mean (1 - rho) / rho`, `b = (1 - mean)(1 - rho) / rho`.
pub fn beta_shapes(mean: f64, dispersion: f64) -> (f64, f64) {
    let scale = (1.0 - dispersion) / dispersion;
    (mean * scale, (1.0 - mean) * scale)
}

pub fn beta_ln_pdf(x: f64, a: f64, b: f64) -> f64 {
    if !(x > 0.0 && x < 1.0) {
        return f64::NEG_INFINITY;
    }
    (a - 1.0) * x.ln() + (b - 1.0) * (-x).ln_1p() - (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_matches_integer_pmf() {
        // C(10, 3) 0.2^3 0.8^7
        let exact = (120.0f64 * 0.008 * 0.8f64.powi(7)).ln();
        let v = binomial_ln_pmf(3, 10.0, 0.2f64.ln(), 0.8f64.ln());
        assert!((v - exact).abs() < 1e-12);
        assert_eq!(binomial_ln_pmf(4, 3.5, 0.1f64.ln(), 0.9f64.ln()), f64::NEG_INFINITY);
    }

    #[test]
    fn binomial_with_real_trials_matches_gamma_form() {
        for (y, d) in [(0u32, 3.7), (5, 5.0), (12, 250.3), (80, 4000.9)] {
            let direct = ln_gamma(d + 1.0) - ln_gamma(d - f64::from(y) + 1.0) - ln_gamma(f64::from(y) + 1.0)
                + f64::from(y) * 0.01f64.ln()
                + (d - f64::from(y)) * 0.99f64.ln();
            let v = binomial_ln_pmf(y, d, 0.01f64.ln(), 0.99f64.ln());
            assert!((v - direct).abs() < 1e-9 * direct.abs().max(1.0), "{y} {d}");
        }
        assert!((ln_factorial(2000) - ln_gamma(2001.0)).abs() < 1e-9);
    }

    #[test]
    fn beta_binomial_sums_to_one_and_tends_to_binomial() {
        let (a, b) = beta_shapes(0.3, 0.2);
        let total: f64 = (0..=12).map(|y| beta_binomial_ln_pmf(y, 12.0, a, b).exp()).sum();
        assert!((total - 1.0).abs() < 1e-10);
        let (a, b) = beta_shapes(0.3, 1e-7);
        for y in 0..=12 {
            let bb = beta_binomial_ln_pmf(y, 12.0, a, b);
            let bi = binomial_ln_pmf(y, 12.0, 0.3f64.ln(), 0.7f64.ln());
            assert!((bb - bi).abs() < 1e-4, "{y}: {bb} vs {bi}");
        }
    }

    #[test]
    fn negative_binomial_moments_and_poisson_limit() {
        let (mu, omega) = (4.0, 2.5);
        let probs: Vec<f64> = (0..400).map(|y| neg_binomial_ln_pmf(y, mu, omega).exp()).collect();
        let mass: f64 = probs.iter().sum();
        let mean: f64 = probs.iter().enumerate().map(|(y, p)| y as f64 * p).sum();
        let var: f64 = probs.iter().enumerate().map(|(y, p)| (y as f64 - mean).powi(2) * p).sum();
        assert!((mass - 1.0).abs() < 1e-10);
        assert!((mean - mu).abs() < 1e-8);
        assert!((var - omega * mu).abs() < 1e-6);
        for y in 0..15 {
            let nb = neg_binomial_ln_pmf_log_excess(y, mu, -30.0);
            assert!((nb - poisson_ln_pmf(y, mu)).abs() < 1e-9, "{y}");
        }
    }
}
