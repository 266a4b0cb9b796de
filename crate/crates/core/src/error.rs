use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("numeric failure: {what} (residual {residual:.3e})")]
    Numeric { what: String, residual: f64 },

    #[error("pole on the imaginary axis at omega = {omega}")]
    PoleOnAxis { omega: f64 },

    #[error("system is not Hurwitz (max Re(lambda) = {margin:.6e})")]
    NotHurwitz { margin: f64 },

    #[error("nominal closed loop is unstable (max Re(lambda) = {margin:.6e})")]
    NominalUnstable { margin: f64 },

    #[error("algebraic loop: {0}")]
    AlgebraicLoop(String),

    #[error("invalid event sequence: {0}")]
    InvalidSequence(String),

    #[error("invalid bounds: {0}")]
    InvalidBounds(String),

    #[error("polynomial degree {degree} exceeds the supported maximum {max}")]
    DegreeOverflow { degree: usize, max: usize },

    #[error("degenerate multiplier: X and Y are both zero")]
    DegenerateMultiplier,

    #[error("input signal has zero energy")]
    ZeroEnergy,

    #[error("infeasible generator request: {0}")]
    InfeasibleGenerator(String),

    #[error("no certificate: {0}")]
    NoCertificate(String),

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
