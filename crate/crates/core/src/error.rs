use thiserror::Error;

use crate::rates::Family;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("state space too small: N = {0}, need N > 1")]
    StateSpaceTooSmall(i64),

    #[error("invalid rate at state {state}: {reason}")]
    InvalidRate { state: i64, reason: String },

    #[error("Bessel function argument must be nonnegative, got {0}")]
    NegativeArgument(f64),

    #[error("Bessel order {order} exceeds the configured maximum {max}")]
    OrderTooLarge { order: i64, max: i64 },

    #[error("I_{order}({x}) overflows the floating range; use the scaled form")]
    Overflow { order: i64, x: f64 },

    #[error("empty order range")]
    EmptyRange,

    #[error("operation expects a {expected:?} model, got {found:?}")]
    FamilyMismatch { expected: Family, found: Family },

    #[error("model is not symmetric: worst residual {residual:e} at state {index:?} (tolerance {tol:e})")]
    Asymmetric { residual: f64, index: Option<i64>, tol: f64 },

    #[error("state {state} outside the admissible range [{lo}, {hi}]")]
    StateOutOfRange { state: i64, lo: i64, hi: i64 },

    #[error("invalid time grid: {0}")]
    InvalidTimeGrid(String),

    #[error("window [{lo}, {hi}] too small for tolerance {tol:e}: lost mass {lost:e}; grow the half-width to at least {required}")]
    WindowTooSmall { lo: i64, hi: i64, tol: f64, lost: f64, required: i64 },

    #[error("quadrature did not converge: achieved error {achieved:e}, requested {requested:e}")]
    QuadratureNonConvergence { achieved: f64, requested: f64 },

    #[error("grid too coarse: error estimate {achieved:e} exceeds tolerance {tol:e} on the finest grid")]
    GridTooCoarse { achieved: f64, tol: f64 },

    #[error("side mismatch: {0}")]
    SideMismatch(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("zero total rate at non-absorbing state {0}")]
    ZeroRate(i64),

    #[error("model document: {0}")]
    Document(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
