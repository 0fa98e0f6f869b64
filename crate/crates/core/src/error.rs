use faer::c64;
use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension cap exceeded: {what} needs dimension {dim}, cap is {cap}")]
    DimensionCap { what: String, dim: u128, cap: usize },

    #[error("operator is not Hermitian: asymmetry {asymmetry:.3e} against norm {norm:.3e}")]
    NotHermitian { asymmetry: f64, norm: f64 },

    #[error("exponential overflow: exponent norm {norm:.3e}")]
    Overflow { norm: f64 },

    #[error("element is singular to tolerance: condition number {condition:.3e}")]
    Singular { condition: f64 },

    #[error("expansional backends disagree by {residual:.3e} (tolerance {tolerance:.3e}) at {terms} series terms")]
    BackendDisagreement { residual: f64, tolerance: f64, terms: usize },

    #[error("invalid finitely correlated triple: {what} violated by {violation:.3e}")]
    InvalidTriple { what: String, violation: f64 },

    #[error("non-primitive: supply ergodic decomposition (peripheral eigenvalues {peripheral:?})")]
    NonPrimitive { peripheral: Vec<c64> },

    #[error("no blocking length up to {l_max} satisfies the cone sandwich; second eigenvalue modulus {second_modulus:.6}")]
    BlockingExhausted { l_max: usize, second_modulus: f64 },

    #[error("power iteration did not converge in {} iterations (last residual {:.3e})", residuals.len(), residuals.last().copied().unwrap_or(f64::NAN))]
    NoConvergence { residuals: Vec<f64> },

    #[error("leading eigenvector is not positive definite: minimum eigenvalue {min_eigenvalue:.3e}")]
    NotPositive { min_eigenvalue: f64 },

    #[error("input is not convex: second difference {violation:.3e} at grid index {index}")]
    NonConvex { index: usize, violation: f64 },

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
