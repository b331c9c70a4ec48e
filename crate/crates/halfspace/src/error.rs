//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Rejected coefficient model parameters.
    #[error("invalid weight model: {0}")]
    InvalidModel(String),

    /// Rejected grid parameters.
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    /// Rejected scenario or nonlinearity parameters.
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    /// A field was used with a grid it does not belong to.
    #[error("field/grid mismatch: {0}")]
    FieldMismatch(String),

    /// An operation received input outside its domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Muckenhoupt integrals diverge for the requested exponent.
    #[error("Muckenhoupt ratio diverges: alpha = {alpha} lies outside (-1, 1)")]
    MuckenhouptDivergent { alpha: f64 },

    /// The Newton linearisation could not be inverted.
    #[error("singular Jacobian: smallest pivot {pivot:.3e}")]
    SingularJacobian { pivot: f64 },

    /// Input degenerate to the point that the requested quantity is undefined.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed binary or text payload.
    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
