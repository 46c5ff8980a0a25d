use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Domain(String),

    #[error("mesh of the coarse function is not an ancestor of the target mesh")]
    AncestryViolation,

    #[error("element family mismatch: {0} vs {1}")]
    FamilyMismatch(&'static str, &'static str),

    #[error("field kind mismatch: expected {expected}, got {actual}")]
    KindMismatch {
        expected: &'static str,
        actual: &'static str,
    },

    #[error("element index {index} out of range ({count} elements)")]
    ElementOutOfRange { index: usize, count: usize },

    #[error("singular {block} block in saddle-point system")]
    SingularBlock { block: &'static str },

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("saddle solve residual {residual:e} exceeds {tolerance:e}")]
    Residual { residual: f64, tolerance: f64 },

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NewtonDiverged { iterations: usize, residual: f64 },

    #[error("eigenvalue computation failed: {0}")]
    Eigen(String),

    #[error("unknown manufactured case `{0}`")]
    UnknownCase(String),

    #[error("nesting chain too short: {0}")]
    ChainTooShort(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("study cell n={n} failed: {source}")]
    Cell {
        n: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 4,
            Error::Cell { source, .. } => source.exit_code(),
            Error::SingularBlock { .. }
            | Error::NonFinite(_)
            | Error::Residual { .. }
            | Error::NewtonDiverged { .. }
            | Error::Eigen(_) => 3,
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
