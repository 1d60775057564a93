use std::path::PathBuf;

/// Errors raised anywhere in the solver pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("degenerate tetrahedron {tet}: volume {volume:e}")]
    DegenerateElement { tet: usize, volume: f64 },

    #[error("refinement closure did not terminate after {levels} levels")]
    ClosureDiverged { levels: usize },

    #[error("non-conforming mesh: {0}")]
    NonConforming(String),

    #[error("{what} index {index} out of range (len {len})")]
    OutOfRange { what: &'static str, index: usize, len: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("{kind} system: factorization failed ({reason})")]
    Factorization { kind: &'static str, reason: String },

    #[error("{kind} system: residual {residual:e} exceeds tolerance {tolerance:e}")]
    Residual { kind: &'static str, residual: f64, tolerance: f64 },

    #[error("singular element mass block on element {0}")]
    SingularMass(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("adaptive iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
