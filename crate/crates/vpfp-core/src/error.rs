//! Error type shared by every module of the crate.

use thiserror::Error;

/// Failures surfaced by the numerical kernels.
///
/// Variants carry enough context (offending value, limiting mode, worst
/// subinterval) for a batch run to report *why* a computation was refused
/// rather than only *that* it failed.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum VpfpError {
    /// A Hermite truncation too small to contain the fluid subspace.
    #[error("basis degree {0} is below the minimum of 2 (microscopic block would be empty)")]
    BasisTooSmall(usize),

    /// Vector/matrix dimensions disagree with the basis.
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    /// The Poisson coupling is singular at zero frequency.
    #[error("operator {kind} is singular at |xi| = {xi_mag}")]
    SingularMode { kind: &'static str, xi_mag: f64 },

    /// A parameter lies outside its admissible range.
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    /// The matrix exponential failed its a-posteriori accuracy check.
    #[error("matrix exponential backward-error estimate {estimate:.3e} exceeds {tolerance:.1e}")]
    Conditioning { estimate: f64, tolerance: f64 },

    /// An eigenvalue iteration did not converge.
    #[error("eigensolver failed to converge on a {dim}x{dim} block")]
    EigenFailure { dim: usize },

    /// A branch of a square root became degenerate.
    #[error("degenerate eigen-branch at |xi| = {xi_mag}: |lambda^2 - |xi|^2 - 1| = {gap:.3e}")]
    DegenerateBranch { xi_mag: f64, gap: f64 },

    /// Quadrature failed to reach the requested tolerance.
    #[error("quadrature did not converge on [{lo}, {hi}] (error estimate {estimate:.3e})")]
    Quadrature { lo: f64, hi: f64, estimate: f64 },

    /// A regression had too few usable points.
    #[error("fit window [{lo}, {hi}] retained only {points} usable points")]
    FitWindow { lo: f64, hi: f64, points: usize },

    /// The explicit integrator was asked to take a step beyond its stability limit.
    #[error("time step {dt} violates the stability limit {limit} (mode |k| = {mode})")]
    Cfl { dt: f64, limit: f64, mode: f64 },

    /// The density has a non-zero spatial mean where it must be neutral.
    #[error("density has non-zero mean {mean:.3e}; background must be neutral")]
    NonNeutral { mean: f64 },

    /// Serialization / IO level failures (kept as strings to stay `Clone`).
    #[error("io: {0}")]
    Io(String),
}

/// Convenience alias.
pub type Result<T> = std::result::Result<T, VpfpError>;

impl From<std::io::Error> for VpfpError {
    fn from(e: std::io::Error) -> Self {
        VpfpError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for VpfpError {
    fn from(e: serde_json::Error) -> Self {
        VpfpError::Io(e.to_string())
    }
}
