//! Crate-wide error type and result alias.

use std::path::PathBuf;

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes surfaced by this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A vector or matrix had the wrong length for the operation.
    #[error("{context}: expected dimension {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    /// Cholesky factorization hit a non-positive pivot; the system is rank
    /// deficient. Callers should raise the ridge penalty.
    #[error("matrix not positive definite: pivot {pivot:e} at index {index}")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    /// The weighted least-squares system stayed singular even after the
    /// ridge floor was applied (all-zero weights or constant columns).
    #[error("degenerate weighted least-squares system: {reason}")]
    DegenerateSystem { reason: String },

    /// Training diverged; suggests a lower learning rate or kl weight.
    #[error("non-finite loss {loss} at epoch {epoch}; lower the learning rate or kl weight")]
    NonFiniteLoss { epoch: usize, loss: f64 },

    /// A prediction input contained NaN or infinity.
    #[error("non-finite value in prediction input")]
    NonFiniteInput,

    /// An analytic-only operation was invoked on a different model kind.
    #[error("operation requires an analytic model, got `{actual}`")]
    WrongKind { actual: &'static str },

    /// A black-box query failed for one generated sample.
    #[error("black-box prediction failed for sample {index}: {source}")]
    Prediction {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    /// A CSV cell failed to parse. Row and column are 1-based.
    #[error("{path}:{row}:{col}: {message}", path = .path.display())]
    Parse {
        path: PathBuf,
        row: usize,
        col: usize,
        message: String,
    },

    /// A CSV cell parsed but was NaN or infinite. Row and column are 1-based.
    #[error("{path}:{row}:{col}: non-finite value", path = .path.display())]
    NonFiniteValue {
        path: PathBuf,
        row: usize,
        col: usize,
    },

    /// Two header columns share the same name.
    #[error("duplicate header column `{name}`")]
    DuplicateHeader { name: String },

    /// A CSV had a header but no data rows.
    #[error("dataset is empty")]
    EmptyDataset,

    /// A parameter failed validation before any compute started.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// File-system access failed; the path is attached for the exit message.
    #[error("{path}: {source}", path = .path.display())]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// JSON (de)serialization failed for a model or report file.
    #[error("{path}: {source}", path = .path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    /// Exit code class for the CLI: 2 for usage/config/input errors,
    /// 3 for runtime compute failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. }
            | Error::NonFiniteValue { .. }
            | Error::DuplicateHeader { .. }
            | Error::EmptyDataset
            | Error::InvalidConfig(_)
            | Error::File { .. }
            | Error::Json { .. } => 2,
            _ => 3,
        }
    }
}
