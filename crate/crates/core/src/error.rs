use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A numeric argument is outside the admissible domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Every particle weight vanished at the given (zero-based) site.
    #[error("degenerate likelihood at site {site}: all particle weights are zero")]
    DegenerateLikelihood { site: usize },

    /// Broken internal bookkeeping; never expected on consistent input.
    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("I/O error on {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("in chromosome {chrom}")]
    Chromosome {
        chrom: String,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_chromosome(self, chrom: &str) -> Self {
        Error::Chromosome {
            chrom: chrom.to_string(),
            source: Box::new(self),
        }
    }
}
