//! Recall calibration curve on a log scale:
//! `f(β) = b + ½(β − b) + (1 / 2a)(1 − e^{−a(β − b)})`, strictly increasing for
//! `a > 0`, with `f(b) = b` and slope tending to ½ above `b`.

use serde::{Deserialize, Serialize};

use crate::ard::SizeEstimate;
use crate::error::{NsumError, Result};

/// Scale the curve's argument lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveScale {
    /// `β = ln(N_k / N)`.
    #[default]
    Beta,
    /// `ln N_k`.
    LogSize,
}

impl CurveScale {
    pub fn to_scale(self, size: f64, population_total: f64) -> f64 {
        match self {
            CurveScale::Beta => (size / population_total).ln(),
            CurveScale::LogSize => size.ln(),
        }
    }

    pub fn from_scale(self, x: f64, population_total: f64) -> f64 {
        match self {
            CurveScale::Beta => x.exp() * population_total,
            CurveScale::LogSize => x.exp(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCurve {
    pub a: f64,
    pub b: f64,
    pub fitted_on: Vec<String>,
    #[serde(default)]
    pub scale: CurveScale,
}

pub fn calibration_curve(a: f64, b: f64, beta: f64) -> f64 {
    let x = beta - b;
    b + 0.5 * x + (-(-a * x).exp_m1()) / (2.0 * a)
}

fn curve_slope(a: f64, b: f64, beta: f64) -> f64 {
    0.5 + 0.5 * (-a * (beta - b)).exp()
}

impl CalibrationCurve {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(NsumError::InvalidInput(format!("calibration curve needs a > 0, got a = {a}, b = {b}")));
        }
        Ok(CalibrationCurve {
            a,
            b,
            fitted_on: Vec::new(),
            scale: CurveScale::Beta,
        })
    }

    pub fn eval(&self, beta: f64) -> f64 {
        calibration_curve(self.a, self.b, beta)
    }
}

fn sum_squares(a: f64, b: f64, known: &[f64], recalled: &[f64]) -> f64 {
    known
        .iter()
        .zip(recalled)
        .map(|(&x, &y)| (calibration_curve(a, b, x) - y).powi(2))
        .sum()
}

const MAX_ITER: usize = 2000;

/// Levenberg-Marquardt on `(ln a, b)` from one start. Returns the end point,
/// its residual sum of squares, and whether it converged.
fn levenberg_marquardt(start: (f64, f64), known: &[f64], recalled: &[f64]) -> (f64, f64, f64, bool) {
    let (mut la, mut b) = start;
    let mut ssr = sum_squares(la.exp(), b, known, recalled);
    let mut lambda = 1e-3;
    for _ in 0..MAX_ITER {
        let a = la.exp();
        let (mut jtj, mut jtr) = ([[0.0f64; 2]; 2], [0.0f64; 2]);
        for (&x, &y) in known.iter().zip(recalled) {
            let d = x - b;
            let e = (-a * d).exp();
            let r = calibration_curve(a, b, x) - y;
            let j = [-(1.0 - e) / (2.0 * a) + 0.5 * d * e, 0.5 - 0.5 * e];
            for p in 0..2 {
                jtr[p] += j[p] * r;
                for q in 0..2 {
                    jtj[p][q] += j[p] * j[q];
                }
            }
        }
        let grad = jtr[0].hypot(jtr[1]);
        if grad < 1e-14 || ssr < 1e-28 {
            return (la, b, ssr, true);
        }
        let mut improved = false;
        while lambda < 1e12 {
            let m = [
                [jtj[0][0] * (1.0 + lambda), jtj[0][1]],
                [jtj[1][0], jtj[1][1] * (1.0 + lambda)],
            ];
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            if det.abs() < 1e-300 {
                lambda *= 10.0;
                continue;
            }
            let step = [
                -(m[1][1] * jtr[0] - m[0][1] * jtr[1]) / det,
                -(-m[1][0] * jtr[0] + m[0][0] * jtr[1]) / det,
            ];
            let (nla, nb) = (la + step[0], b + step[1]);
            let new = sum_squares(nla.exp(), nb, known, recalled);
            if new.is_finite() && new <= ssr {
                let tiny = step[0].abs() + step[1].abs() < 1e-13 * (1.0 + la.abs() + b.abs());
                let rel = (ssr - new) <= 1e-15 * ssr;
                la = nla;
                b = nb;
                ssr = new;
                lambda = (lambda / 10.0).max(1e-12);
                improved = true;
                if tiny || (rel && lambda <= 1e-6) {
                    return (la, b, ssr, true);
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            // No descent direction left at machine precision.
            return (la, b, ssr, true);
        }
    }
    (la, b, ssr, false)
}

/// Least-squares fit of `(a, b)` with `a > 0`, multi-started over a grid.
pub fn fit_calibration_curve(
    beta_known: &[f64],
    beta_recalled: &[f64],
    labels: &[String],
    scale: CurveScale,
) -> Result<CalibrationCurve> {
    let n = beta_known.len();
    if n < 3 || beta_recalled.len() != n {
        return Err(NsumError::InvalidInput(format!(
            "calibration curve needs at least 3 paired subpopulations, got {n} and {}",
            beta_recalled.len()
        )));
    }
    if beta_known.iter().chain(beta_recalled).any(|v| !v.is_finite()) {
        return Err(NsumError::InvalidInput("calibration inputs must be finite".into()));
    }
    let mut sorted = beta_known.to_vec();
    sorted.sort_by(f64::total_cmp);
    let b_starts = [sorted[0], sorted[n / 2], sorted[n - 1]];
    let mut best: Option<(f64, f64, f64)> = None;
    let mut best_any = f64::INFINITY;
    for la in [-3.0, -1.5, 0.0, 1.5, 3.0] {
        for &b in &b_starts {
            let (la, b, ssr, ok) = levenberg_marquardt((la, b), beta_known, beta_recalled);
            best_any = best_any.min(ssr);
            if ok && best.is_none_or(|(_, _, s)| ssr < s) {
                best = Some((la, b, ssr));
            }
        }
    }
    let (la, b, _) = best.ok_or(NsumError::NonConvergence {
        iterations: MAX_ITER,
        residual: best_any,
    })?;
    Ok(CalibrationCurve {
        a: la.exp(),
        b,
        fitted_on: labels.to_vec(),
        scale,
    })
}

/// Recovers the true value from a recalled one: `f⁻¹(β′)` by bisection.
pub fn apply_calibration_curve(curve: &CalibrationCurve, beta_recalled: f64) -> f64 {
    let (a, b, y) = (curve.a, curve.b, beta_recalled);
    // f(x) <= x everywhere, and f(x) >= b + (x - b)/2 above b.
    let (mut lo, mut hi) = if y >= b { (y, b + 2.0 * (y - b)) } else { (y, b) };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if calibration_curve(a, b, mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Applies the inverse curve to a size estimate's point and interval; the
/// standard error is carried through by the delta method.
pub fn apply_curve_to_estimate(curve: &CalibrationCurve, estimate: &SizeEstimate, population_total: u64) -> SizeEstimate {
    let total = population_total as f64;
    let map = |v: f64| {
        if v > 0.0 {
            curve
                .scale
                .from_scale(apply_calibration_curve(curve, curve.scale.to_scale(v, total)), total)
        } else {
            0.0
        }
    };
    let mut out = estimate.clone();
    out.point = map(estimate.point);
    out.interval = estimate.interval.map(|(lo, hi)| (map(lo), map(hi)));
    if estimate.point > 0.0 {
        let x = curve.scale.to_scale(out.point, total);
        let factor = out.point / estimate.point / curve_slope(curve.a, curve.b, x);
        out.std_error = estimate.std_error.map(|s| s * factor);
    }
    out.calibrations_applied.push(format!("recall_curve:a={}:b={}", curve.a, curve.b));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_point_and_direct_value() {
        for (a, b) in [(1.0, 0.0), (0.3, -4.0), (5.0, 2.0)] {
            assert_eq!(calibration_curve(a, b, b), b);
        }
        let v = calibration_curve(1.0, 0.0, 2.0);
        assert!((v - (1.0 + 0.5 * (1.0 - (-2.0f64).exp()))).abs() < 1e-9);
        assert!((v - 1.4323).abs() < 1e-4);
    }

    #[test]
    fn inverse_round_trips() {
        let c = CalibrationCurve::new(1.0, 0.0).unwrap();
        for x in [-2.0, 0.0, 3.0] {
            assert!((apply_calibration_curve(&c, c.eval(x)) - x).abs() < 1e-9);
        }
        assert_eq!(apply_calibration_curve(&c, 0.0), 0.0);
        assert!((apply_calibration_curve(&c, 1.4323) - 2.0).abs() < 1e-3);
    }

    #[test]
    fn noiseless_fit_recovers_parameters() {
        for (a, b) in [(1.0, 0.0), (0.5, -5.0), (2.0, -3.0)] {
            let xs: Vec<f64> = (0..12).map(|k| -9.0 + 0.7 * f64::from(k)).collect();
            let ys: Vec<f64> = xs.iter().map(|&x| calibration_curve(a, b, x)).collect();
            let fit = fit_calibration_curve(&xs, &ys, &[], CurveScale::Beta).unwrap();
            assert!((fit.a - a).abs() < 1e-3 && (fit.b - b).abs() < 1e-3, "{fit:?} vs ({a}, {b})");
            for (&x, &y) in xs.iter().zip(&ys) {
                assert!((apply_calibration_curve(&fit, y) - x).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn too_few_points_is_an_error() {
        assert!(fit_calibration_curve(&[1.0, 2.0], &[1.0, 2.0], &[], CurveScale::Beta).is_err());
    }

    #[test]
    fn estimate_transform_is_monotone() {
        let c = CalibrationCurve::new(1.0, -4.0).unwrap();
        let mut e = SizeEstimate::new("mle", 500.0);
        e.interval = Some((300.0, 800.0));
        e.std_error = Some(120.0);
        let out = apply_curve_to_estimate(&c, &e, 100_000);
        let (lo, hi) = out.interval.unwrap();
        assert!(lo < out.point && out.point < hi);
        // f(x) <= x with equality only at b, so inversion never shrinks.
        assert!(out.point > 500.0);
    }

    proptest::proptest! {
        #[test]
        fn curve_is_strictly_increasing(a in 0.01f64..10.0, b in -10.0f64..5.0, x in -15.0f64..10.0, h in 1e-3f64..3.0) {
            proptest::prop_assert!(calibration_curve(a, b, x + h) > calibration_curve(a, b, x));
        }

        #[test]
        fn inverse_is_exact(a in 0.05f64..5.0, b in -8.0f64..2.0, x in -12.0f64..6.0) {
            let c = CalibrationCurve::new(a, b).unwrap();
            let y = c.eval(x);
            proptest::prop_assume!(y.is_finite());
            proptest::prop_assert!((apply_calibration_curve(&c, y) - x).abs() < 1e-8 * (1.0 + x.abs()));
        }
    }
}
