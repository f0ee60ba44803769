use thiserror::Error;

use crate::attitude::AttitudeError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("mass matrix is not positive definite (inconsistent inertial parameters)")]
    SingularMass,
    #[error("non-finite value in {what} at t = {t:.4} s")]
    NonFinite { what: &'static str, t: f64 },
    #[error("Euler-angle kinematic singularity: pitch {pitch:.6} rad is within {tol:e} of ±π/2")]
    EulerSingularity { pitch: f64, tol: f64 },
    #[error("invalid parameter {path}: {reason}")]
    InvalidParameter { path: String, reason: String },
    #[error("disturbance bound violated on channel {channel}: |δ| = {value:e} ≥ bound {bound:e}")]
    DisturbanceBound {
        channel: usize,
        value: f64,
        bound: f64,
    },
    #[error("reference planning failed: {0}")]
    Planning(String),
    #[error(transparent)]
    Attitude(#[from] AttitudeError),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            path: path.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
