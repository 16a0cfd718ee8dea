use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the band-selection and positioning pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("insufficient anchors: need at least {needed}, got {got}")]
    InsufficientAnchors { needed: usize, got: usize },

    #[error("rank-deficient system: {0}")]
    RankDeficient(String),

    #[error("no convergence after {iterations} iterations (last step {last_step:e} m)")]
    Convergence { iterations: usize, last_step: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("run {run}, sweep {sweep}: {source}")]
    Run {
        run: usize,
        sweep: usize,
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

    /// Process exit code for the CLI: 2 config, 3 numerical, 4 I/O.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Run { source, .. } => source.exit_code(),
            Error::Config(_) => 2,
            Error::Io { .. } | Error::Parse { .. } => 4,
            Error::Dimension(_)
            | Error::NumericalDegeneracy(_)
            | Error::Domain(_)
            | Error::InsufficientAnchors { .. }
            | Error::RankDeficient(_)
            | Error::Convergence { .. }
            | Error::InsufficientData(_) => 3,
        }
    }
}
