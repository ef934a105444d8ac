use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("quadratic form is not positive semidefinite (smallest eigenvalue {min_eigenvalue:e}); convexify the problem first")]
    NotConvex { min_eigenvalue: f64 },

    #[error("{n} qubits exceeds the simulator limit of {max}")]
    TooManyQubits { n: usize, max: usize },

    #[error("brute-force optimum {bits} violates the budget constraint; penalty weight too small")]
    InfeasibleOptimum { bits: String },

    #[error("ensemble has no annotations; run classification first")]
    MissingAnnotations,

    #[error("record integrity check failed: {0}")]
    Integrity(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
