use thiserror::Error;

/// Errors raised by the solver, the inversion loop and the experiment harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Invalid user-supplied configuration (grid size, viscosity, catalogue entry, ...).
    #[error("configuration error: {0}")]
    Config(String),
    /// Inconsistent arguments, e.g. fields of different azimuthal order.
    #[error("usage error: {0}")]
    Usage(String),
    /// The banded system lost invertibility: `omega` is close to an inertial mode of order `m`.
    #[error("near-resonance at omega = {omega}, m = {m}: pivot {pivot:.3e} below {threshold:.3e}")]
    NearResonance {
        omega: f64,
        m: i32,
        pivot: f64,
        threshold: f64,
    },
    #[error("internal error: {0}")]
    Internal(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Short machine-readable tag, used in error JSON documents.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Usage(_) => "usage",
            Error::NearResonance { .. } => "near_resonance",
            Error::Internal(_) => "internal",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
