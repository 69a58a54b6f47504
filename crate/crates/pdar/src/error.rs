//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by the solver, the benchmark, and trace I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// A vector or matrix had the wrong length.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A block index was out of range.
    #[error("block index {index} out of range for {n_blocks} blocks")]
    IndexOutOfRange { index: usize, n_blocks: usize },

    /// An argument fell outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A non-finite value was encountered during a solve.
    #[error("numerical failure in block {block} at outer iteration {outer_iter}: {detail}")]
    Numerical {
        block: usize,
        outer_iter: usize,
        detail: String,
    },

    /// A caller violated an operation's contract.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A file could not be parsed.
    #[error("parse error in {path} at line {line}: {detail}")]
    Parse {
        path: String,
        line: usize,
        detail: String,
    },

    /// An I/O operation failed.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Traces over different instances were compared.
    #[error("comparison error: {0}")]
    Comparison(String),
}

impl Error {
    /// Attaches the outer iteration index to a numerical failure.
    pub(crate) fn with_outer_iter(self, k: usize) -> Self {
        match self {
            Error::Numerical { block, detail, .. } => Error::Numerical {
                block,
                outer_iter: k,
                detail,
            },
            other => other,
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
