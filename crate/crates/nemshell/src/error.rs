//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("inadmissible shell displacement: {0}")]
    Admissibility(String),

    #[error("map inversion failed: {0}")]
    Inversion(String),

    #[error("point outside the moving domain: {0}")]
    Domain(String),

    #[error("linear solver failed: {0}")]
    Solver(String),

    #[error("assembly failed: {0}")]
    Assembly(String),

    #[error("Picard iteration did not converge: {0}")]
    NonConvergence(String),

    #[error("energy inequality violated at t = {t}: overshoot {overshoot:.3e}")]
    EnergyViolation { t: f64, overshoot: f64 },

    #[error("bound violated: {0}")]
    BoundViolation(String),

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("checkpoint rejected: {0}")]
    Checkpoint(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn config(key: &str, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.to_string(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI, per the documented contract.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Checkpoint(_) => 2,
            Error::EnergyViolation { .. }
            | Error::BoundViolation(_)
            | Error::Admissibility(_)
            | Error::Domain(_) => 3,
            Error::NonConvergence(_) | Error::Solver(_) | Error::Inversion(_) => 4,
            Error::Io { .. } => 5,
            Error::Geometry(_) | Error::Assembly(_) => 3,
        }
    }
}
