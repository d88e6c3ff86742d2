use thiserror::Error;

/// Errors raised by model construction, solvers and estimators.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input data; `path` names the offending location (e.g. `hazard.x1.values[2]`).
    #[error("invalid {path}: {message}")]
    Validation { path: String, message: String },

    /// A query outside the domain an object supports (unknown state, age beyond the grid, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A declared bound was violated while running (e.g. a rate multiplier above `C_r`).
    #[error("contract violation: {0}")]
    Contract(String),

    /// NaN or overflow in a solver.
    #[error("numerical failure at time index {i}, state {state}, age index {j}: {message}")]
    Numerical {
        i: usize,
        state: usize,
        j: usize,
        message: String,
    },

    #[error("adaptive quadrature did not reach tolerance {tolerance:e} (achieved {achieved:e})")]
    Quadrature { tolerance: f64, achieved: f64 },

    #[error("no convergence after {iterations} iterations (last distance {distance:e})")]
    NonConvergence { iterations: usize, distance: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Numerical { .. } | Error::Quadrature { .. } | Error::NonConvergence { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
