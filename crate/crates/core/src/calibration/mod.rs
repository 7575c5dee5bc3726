//! Post hoc corrections applied to size estimates: division by a visibility
//! factor for transmission error, recall calibration on the log scale, and
//! leave-one-out diagnostics that back-estimate known subpopulations.

mod curve;
mod eiv;
mod loo;
mod visibility;

pub use curve::{
    apply_calibration_curve, apply_curve_to_estimate, calibration_curve, fit_calibration_curve, CalibrationCurve,
    CurveScale,
};
pub use eiv::{eiv_adjust_draws, eiv_fit, eiv_recall_adjust, loo_bootstrap_variances, EivFit};
pub use loo::{loo_backestimates, render_loo_csv, trim_stepwise, LooRow, TrimOutcome, TrimRound};
pub use visibility::{scale_by_visibility, VisibilityFactor};
