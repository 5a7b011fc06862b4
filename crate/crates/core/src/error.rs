use thiserror::Error;

/// Failures raised by the map evaluations, root finders and detectors.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynError {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite value in {what} at step {step}")]
    NonFinite { what: &'static str, step: usize },

    #[error("root not bracketed: {0}")]
    NoBracket(String),

    #[error("singular point at x = {x}")]
    Singular { x: f64 },

    #[error("Newton iteration did not converge from ({x}, {y})")]
    NoConvergence { x: f64, y: f64 },
}

pub type Result<T> = std::result::Result<T, DynError>;
