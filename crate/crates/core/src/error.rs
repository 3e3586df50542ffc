use std::path::PathBuf;

use crate::nn::MlpClassifier;
use crate::trainer::TrainReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Malformed file content. `location` names a byte offset or a row.
    #[error("format error in {path} at {location}: {message}")]
    Format {
        path: String,
        location: String,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// No penalty weight in the schedule produced a model meeting the
    /// marginal constraint. Carries the model with the smallest violation.
    #[error("class-prior constraint unsatisfied: best KL {best_kl:.6} > delta {delta:.6}")]
    ConstraintUnsatisfied {
        best_kl: f64,
        delta: f64,
        model: Box<MlpClassifier>,
        report: Box<TrainReport>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(
        path: impl Into<String>,
        location: impl Into<String>,
        message: impl Into<String>,
    ) -> Self {
        Error::Format {
            path: path.into(),
            location: location.into(),
            message: message.into(),
        }
    }
}
