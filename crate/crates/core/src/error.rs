use thiserror::Error;

use crate::model::Violation;

pub type Result<T> = std::result::Result<T, IgoError>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum IgoError {
    #[error("invalid plant: {0}")]
    InvalidPlant(String),

    #[error(
        "rates must be distinct: scaled points {left} and {right} are closer than {min_separation}"
    )]
    CoincidentRates {
        left: f64,
        right: f64,
        min_separation: f64,
    },

    #[error("divided difference needs pairwise distinct points, got {0} twice")]
    DuplicatePoints(f64),

    #[error("divided difference needs at least one point")]
    EmptyPoints,

    #[error("{function} is undefined at {x}")]
    Domain { function: &'static str, x: f64 },

    #[error("stability criterion requires ordered rates a1 < a2 < a3, got {0:?}")]
    RateOrdering([f64; 3]),

    #[error("stability criterion requires F'(y0) <= 0 and Phi'(y0) >= 0, got F' = {f_slope}, Phi' = {phi_slope}")]
    SlopeSign { f_slope: f64, phi_slope: f64 },

    #[error("state component {value} exceeded ceiling {ceiling} at step {step}")]
    StateCeiling {
        step: usize,
        value: f64,
        ceiling: f64,
    },

    #[error("fixed-point solver did not converge in {iterations} iterations (last residual {:e})", residuals.last().copied().unwrap_or(f64::NAN))]
    NoConvergence {
        iterations: usize,
        residuals: Vec<f64>,
    },

    #[error("orbit of length {len} is too short, need at least {required}")]
    OrbitTooShort { len: usize, required: usize },

    #[error("no stable slopes in the search box; stability border is {c_j}·F' + {c_d}·Phi' = -1")]
    NoStableSlopes { c_j: f64, c_d: f64 },

    #[error("target {what} = {value} lies outside modulation bounds [{lo}, {hi}]")]
    TargetOutsideBounds {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("invalid modulation: {}", violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidModulation { violations: Vec<Violation> },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("internal consistency check failed: {0}")]
    Inconsistent(String),
}
