use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mdp: {0}")]
    Validation(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("reward r[{h}][{s}][{a}] = {value} lies outside [0, 1]")]
    BoxViolation { h: usize, s: usize, a: usize, value: f64 },

    #[error("{method} diverged at iteration {iter}: objective is not finite")]
    Divergence { method: String, iter: usize },

    #[error("invalid instance spec: {0}")]
    Spec(String),

    #[error("invalid solver config: {0}")]
    Config(String),

    #[error("expert policy is not deterministic at h={h}, s={s}")]
    NonDeterministicExpert { h: usize, s: usize },

    #[error("demonstration dataset is empty")]
    EmptyDataset,

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("regime violation: {0}")]
    Regime(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    /// Errors caused by the caller's inputs rather than by a computation.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Parse { .. }
                | Error::Config(_)
                | Error::Spec(_)
                | Error::Validation(_)
                | Error::Shape(_)
        )
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Parse { path: path.into(), message: message.to_string() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn input_errors() {
        assert!(Error::Config("x".into()).is_input_error());
        assert!(Error::parse("a.json", "bad").is_input_error());
        assert!(!Error::Regime("x".into()).is_input_error());
        assert!(!Error::Divergence { method: "bc".into(), iter: 3 }.is_input_error());
        assert_eq!(Error::parse("a.json", "bad").to_string(), "a.json: bad");
    }
}
