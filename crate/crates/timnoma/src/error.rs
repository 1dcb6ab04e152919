//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by scenario validation, power allocation, signal
/// processing and the simulation harness.
#[derive(Debug, Error)]
pub enum Error {
    /// A scenario invariant was violated; the message names the invariant.
    #[error("invalid scenario: {0}")]
    Scenario(String),

    /// A power-allocation scheme was applied to an incompatible scenario,
    /// or its parameters were out of range.
    #[error("power allocation: {0}")]
    Power(String),

    /// Vector/matrix dimensions do not line up.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A quantity left its mathematical domain (negative distance,
    /// negative variance, zero denominator, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Simulation configuration failed validation.
    #[error("invalid config: {0}")]
    Config(String),

    /// Exported data could not be parsed back.
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
