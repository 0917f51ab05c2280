use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: parse error: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// A domain invariant was violated by the input.
    #[error("{0}")]
    Invalid(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix not PSD: smallest eigenvalue {min_eigenvalue:e} below tolerance {tolerance:e}")]
    NotPsd { min_eigenvalue: f64, tolerance: f64 },

    #[error(
        "symmetric eigensolver did not converge at index {index} of {n} \
         (frobenius norm {frobenius_norm:e}, max |offdiag| {max_offdiag:e})"
    )]
    NoConvergence {
        index: usize,
        n: usize,
        frobenius_norm: f64,
        max_offdiag: f64,
    },

    #[error("rank deficient: {0}")]
    RankDeficient(String),

    #[error("zero variance: {0}")]
    ZeroVariance(String),

    #[error("non-finite loss at step {step} ({what})")]
    Diverged { step: usize, what: String },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// True for failures of the numerical machinery itself, as opposed to
    /// bad or inconsistent input.
    pub fn is_numerical(&self) -> bool {
        if let Error::Context { source, .. } = self {
            return source.is_numerical();
        }
        matches!(
            self,
            Error::NotPsd { .. }
                | Error::NoConvergence { .. }
                | Error::RankDeficient(_)
                | Error::ZeroVariance(_)
                | Error::Diverged { .. }
        )
    }
}
