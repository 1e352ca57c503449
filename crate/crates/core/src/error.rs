use std::path::PathBuf;

use thiserror::Error;

use crate::vec2::Vec2;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point ({}, {}) is not strictly inside the domain", .0.x, .0.y)]
    OutsideDomain(Vec2),

    #[error("evaluation point ({}, {}) coincides with a vortex", .0.x, .0.y)]
    Singularity(Vec2),

    #[error("invalid vortex configuration: {0}")]
    Configuration(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("linear solver did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    Solver { iterations: usize, residual: f64 },

    #[error("Newton iteration stalled after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        last_iterate: Box<crate::profile_gamma::RadialProfile>,
    },

    #[error("path integration failed: {0}")]
    Path(String),

    #[error("non-finite values at t = {t}")]
    Blowup { t: f64 },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("`{key}`: {message}")]
    Validation { key: String, message: String },

    #[error("{format}: {message}")]
    Format {
        format: &'static str,
        message: String,
    },

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. }
            | Error::Validation { .. }
            | Error::Configuration(_)
            | Error::InvalidArgument(_)
            | Error::OutsideDomain(_) => 2,
            Error::Io { .. } | Error::Format { .. } => 4,
            _ => 3,
        }
    }
}
