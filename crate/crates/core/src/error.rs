use std::path::PathBuf;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A precondition on caller-supplied values was violated.
    #[error("invalid input: {0}")]
    Input(String),

    /// A scene, pose or keypoint failed validation.
    #[error("validation failed: {0}")]
    Validation(String),

    /// A line of a JSONL stream could not be decoded.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    /// More poses than a fixed-size feature vector can hold.
    #[error("capacity exceeded: {got} poses, at most {max} supported")]
    Capacity { got: usize, max: usize },

    /// A model was produced with a different feature catalog or file format.
    #[error("version mismatch: expected {expected}, found {found}")]
    VersionMismatch { expected: String, found: String },

    /// Training produced a non-finite objective.
    #[error("training diverged: {0}")]
    Divergence(String),

    /// An iterative solver hit its iteration cap.
    #[error("solver did not converge after {iterations} iterations (max KKT violation {max_violation:.3e}, tol {tol:.1e})")]
    Convergence {
        iterations: usize,
        max_violation: f64,
        tol: f64,
    },

    /// The synthetic scene generator could not find a valid layout.
    #[error("placement failed: {0}")]
    Placement(String),

    /// A model file exists but cannot be decoded.
    #[error("corrupt model file {path}: {message}")]
    CorruptModel { path: PathBuf, message: String },

    /// An experiment or CLI configuration is incomplete or inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// True for errors caused by bad configuration rather than bad data.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::VersionMismatch { .. })
    }
}
