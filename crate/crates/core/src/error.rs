use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid configuration; `key` names the offending setting.
    #[error("invalid configuration `{key}`: {message}")]
    Config { key: String, message: String },

    /// The stiffness side of the pencil failed its Cholesky factorization.
    #[error("coercivity violated at k = {k}, lambda = {lambda}: stiffness form is not positive definite")]
    Coercivity { k: f64, lambda: f64 },

    /// The fixed-point function does not bracket a root for this branch.
    #[error("no unstable branch n = {n} at k = {k}: {reason}")]
    NoUnstableBranch { k: f64, n: usize, reason: String },

    /// A linear solve or iteration broke down.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
