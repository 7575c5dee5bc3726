use std::path::PathBuf;

use thiserror::Error;

use crate::ard::ValidationReport;

pub type Result<T, E = NsumError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum NsumError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: u64,
        column: usize,
        message: String,
    },

    #[error("{0}")]
    Format(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("survey failed validation:\n{0}")]
    Validation(ValidationReport),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no known subpopulations to estimate degrees from")]
    NoKnownColumns,

    #[error("column {0} is not an unknown subpopulation of this survey")]
    NotUnknown(String),

    #[error("every respondent has an estimated degree of zero")]
    AllDegreesZero,

    #[error("sum of estimated degrees is zero")]
    ZeroDegreeSum,

    #[error(
        "zero-proportions are not ordered by size: {smaller} (size {smaller_size}, P(W)={smaller_pw}) \
         vs {larger} (size {larger_size}, P(W)={larger_pw})"
    )]
    OrderingViolation {
        smaller: String,
        smaller_size: u64,
        smaller_pw: f64,
        larger: String,
        larger_size: u64,
        larger_pw: f64,
    },

    #[error("weighted estimator requires respondent weights")]
    MissingWeights,

    #[error("estimated visibility is zero")]
    ZeroVisibility,

    #[error("transmission variant requires a transmission prior (eta, nu) for the unknown column")]
    MissingTransmissionPrior,

    #[error("barrier variant requires respondent covariates")]
    MissingCovariates,

    #[error("missing Likert responses for column {0}")]
    MissingLikert(String),

    #[error("parameter {0} not present in posterior draws")]
    MissingParameter(String),

    #[error("degenerate recall slope (|b| = {0:e})")]
    DegenerateRecallSlope(f64),

    #[error("optimizer did not converge after {iterations} iterations (residual sum of squares {residual})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("fold {fold}: {source}")]
    Fold {
        fold: String,
        #[source]
        source: Box<NsumError>,
    },

    #[error("infeasible world configuration: {0}")]
    InfeasibleWorld(String),
}

impl NsumError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        NsumError::Io {
            path: path.into(),
            source,
        }
    }
}
