use thiserror::Error;

/// Errors raised by the latency laboratory.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LatError {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// No solution exists within the configured search range.
    #[error("infeasible: {0}")]
    Infeasible(String),
    /// Adaptive quadrature stopped before reaching the requested tolerance.
    #[error("quadrature did not converge: estimated error {achieved:e} > requested {requested:e}")]
    Quadrature { achieved: f64, requested: f64 },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, LatError>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(LatError::Domain(msg.into()))
}

/// Rejects NaN, infinities and negative values.
pub(crate) fn check_nonneg(name: &str, x: f64) -> Result<()> {
    if !x.is_finite() || x < 0.0 {
        return domain(format!("{name} must be finite and >= 0, got {x}"));
    }
    Ok(())
}

pub(crate) fn check_positive(name: &str, x: f64) -> Result<()> {
    if !x.is_finite() || x <= 0.0 {
        return domain(format!("{name} must be finite and > 0, got {x}"));
    }
    Ok(())
}

pub(crate) fn check_probability(name: &str, x: f64) -> Result<()> {
    if !(x > 0.0 && x < 1.0) {
        return domain(format!("{name} must lie in (0, 1), got {x}"));
    }
    Ok(())
}
