//! Network scale-up estimators for aggregated relational data (ARD).
//!
//! The crate covers the closed-form estimators ([`classic`]), hierarchical
//! Bayesian models fitted by MCMC ([`bayes`]), post hoc calibration
//! ([`calibration`]) and a ground-truth simulator ([`simulator`]) that injects
//! transmission, barrier, recall and response biases.

pub mod ard;
pub mod bayes;
pub mod calibration;
pub mod classic;
pub mod error;
pub mod method;
pub mod rng;
pub mod simulator;
pub(crate) mod special;

pub use ard::{ArdSurvey, DegreeEstimates, EnrichedArd, SizeEstimate};
pub use error::{NsumError, Result};

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
