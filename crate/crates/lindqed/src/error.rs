//! Library-wide error type.
//!
//! Numerical failures are never silent: quadrature non-convergence,
//! propagator non-convergence and resource-guard violations all carry
//! the achieved tolerance or the offending size so callers can report
//! or retry with refined settings.

use thiserror::Error;

/// Errors produced by model construction, quadrature and propagation.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violated a documented precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Construction would exceed a configured resource guard.
    #[error("resource guard: {what} = {got} exceeds cap {cap}")]
    ResourceGuard {
        what: &'static str,
        got: usize,
        cap: usize,
    },

    /// A quadrature did not settle under node doubling.
    #[error("quadrature not converged: achieved {achieved:.3e}, required {required:.3e} ({context})")]
    QuadratureNotConverged {
        achieved: f64,
        required: f64,
        context: String,
    },

    /// An eigensolve did not converge under basis doubling.
    #[error("eigenbasis not converged: achieved {achieved:.3e}, required {required:.3e} ({context})")]
    EigenNotConverged {
        achieved: f64,
        required: f64,
        context: String,
    },

    /// Krylov propagation failed to reach the requested tolerance.
    #[error("propagation not converged: residual {residual:.3e} after {steps} substeps (tol {tol:.3e})")]
    PropagationFailed {
        residual: f64,
        steps: usize,
        tol: f64,
    },

    /// An internal consistency check failed (signals a bug, not bad input).
    #[error("internal consistency violated: {0}")]
    Internal(String),

    /// Finite-difference validation failed in the harness.
    #[error("finite-difference validation failed: {0}")]
    FdValidation(String),

    /// Mismatched array length.
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

/// Convenience alias.
pub type Result<T> = std::result::Result<T, Error>;
