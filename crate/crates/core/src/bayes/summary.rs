use super::PosteriorDraws;
use crate::ard::SizeEstimate;
use crate::error::{NsumError, Result};

/// Linear-interpolation quantile of sorted data.
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Summarizes the `size[unknown]` posterior: median, central 95% interval
/// and posterior standard deviation.
pub fn posterior_size(draws: &PosteriorDraws, unknown: &str) -> Result<SizeEstimate> {
    let name = format!("size[{unknown}]");
    let mut values = draws.pooled(&name).ok_or(NsumError::MissingParameter(name))?;
    if values.is_empty() {
        return Err(NsumError::InvalidInput("posterior has no draws".into()));
    }
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let mut est = SizeEstimate::new(draws.model.clone(), quantile_sorted(&values, 0.5));
    est.std_error = Some(var.sqrt());
    est.interval = Some((quantile_sorted(&values, 0.025), quantile_sorted(&values, 0.975)));
    est.metadata.unknown = Some(unknown.to_string());
    est.metadata.decisions = draws.decisions.clone();
    if draws.converged == Some(false) {
        est.metadata.warnings.push("chains did not converge (split R-hat above threshold)".into());
    }
    Ok(est)
}
