//! Error type shared by every module of the crate.

use std::path::PathBuf;

/// Everything that can go wrong while building inputs, running an engine or
/// writing results.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An input violates its documented validity range.
    #[error("invalid {field}: {reason}")]
    InvalidInput { field: &'static str, reason: String },

    /// A closed form was evaluated at a pole or outside its domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative or series procedure stopped before reaching its target.
    #[error("no convergence: {0}")]
    NonConvergence(String),

    /// The Crank-Nicolson left-hand matrix could not be factorised.
    #[error("singular linear system ({dim}x{dim})")]
    SingularMatrix { dim: usize },

    #[error("config: {0}")]
    Config(String),

    #[error("i/o on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidInput {
            field,
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad user input.
    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::InvalidInput { .. } | Error::Config(_))
    }

    /// True when a numerical procedure failed on valid input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Domain(_) | Error::NonConvergence(_) | Error::SingularMatrix { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
