//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates a documented precondition.
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    /// Vector/matrix shapes do not line up.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A NaN or infinity showed up where a finite value is required.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// An iterative method failed to converge or training diverged.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A simulation step failed; the step index is attached.
    #[error("simulation failed at step {step}: {source}")]
    Simulation {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    /// Configuration file problems (missing keys, bad values, parse errors).
    #[error("config error: {0}")]
    Config(String),

    /// Malformed artifact on disk (model file, dataset, trajectory).
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Exit status the CLI maps this error to: 1 for usage/config
    /// problems, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParam(_)
            | Error::Dimension(_)
            | Error::Config(_)
            | Error::Format(_)
            | Error::Io(_) => 1,
            Error::NonFinite(_) | Error::Numerical(_) => 2,
            Error::Simulation { source, .. } => source.exit_code(),
        }
    }
}

/// Rejects non-finite scalars at API boundaries.
pub fn ensure_finite(value: f64, what: &str) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("{what} = {value}")))
    }
}

/// Rejects a slice containing non-finite entries.
pub fn ensure_all_finite(values: &[f64], what: &str) -> Result<()> {
    for (i, v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("{what}[{i}] = {v}")));
        }
    }
    Ok(())
}
