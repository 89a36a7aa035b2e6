//! Error type shared by every module of the crate.

use alloc::string::String;

/// Everything that can go wrong in the numerical core.
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the domain of a function (e.g. the origin for
    /// the F-functions, or `t <= s` for a heat kernel).
    #[error("domain error: {0}")]
    Domain(String),
    /// A configuration is inconsistent or numerically unsafe (under-resolved
    /// mollifier, unstable time step, ...).
    #[error("configuration error: {0}")]
    Configuration(String),
    /// An adaptive quadrature did not meet its tolerance.
    #[error("quadrature did not converge: value {value}, error estimate {error} after {evals} evaluations")]
    Quadrature { value: f64, error: f64, evals: usize },
    /// A field that must be positive (e.g. before taking a logarithm) is not.
    #[error("non-positive value {value} at t = {t}, x = {x}")]
    NonPositive { t: f64, x: f64, value: f64 },
    /// A statistical estimator failed (singular normal equations, no convergence).
    #[error("estimation failed: {0}")]
    Estimation(String),
}

pub type Result<T> = core::result::Result<T, Error>;

/// Shorthand for building a configuration error from a format string.
macro_rules! config_err {
    ($($arg:tt)*) => {
        $crate::error::Error::Configuration(alloc::format!($($arg)*))
    };
}

/// Shorthand for building a domain error from a format string.
macro_rules! domain_err {
    ($($arg:tt)*) => {
        $crate::error::Error::Domain(alloc::format!($($arg)*))
    };
}

pub(crate) use config_err;
pub(crate) use domain_err;
