use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: dimension mismatch: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("{op}: non-finite value produced")]
    NonFinite { op: &'static str },

    #[error("invalid state: {0}")]
    State(String),

    #[error("gradient check: function is not deterministic ({first} vs {second})")]
    NonDeterministic { first: f64, second: f64 },

    #[error("token id {id} out of range for vocabulary of size {size}")]
    Vocabulary { id: usize, size: usize },

    #[error("sample {0} has no unmasked target tokens")]
    DegenerateSample(usize),

    #[error("non-finite gradient in parameter `{0}`")]
    NonFiniteGradient(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("clip for `{video_id}` unusable: video is {duration_ms} ms, need at least 10000 ms")]
    UnusableClip { video_id: String, duration_ms: u64 },

    #[error("task `{task_id}` has {count} votes, expected 3")]
    Aggregation { task_id: String, count: usize },

    #[error("Krippendorff's alpha is undefined: no unit has two or more ratings")]
    UndefinedAlpha,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed file: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Whether the error stems from bad user input (as opposed to an
    /// internal failure such as divergence or a broken invariant).
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Vocabulary { .. }
                | Error::Parse { .. }
                | Error::UnusableClip { .. }
                | Error::Aggregation { .. }
                | Error::UndefinedAlpha
                | Error::Config(_)
                | Error::Input(_)
                | Error::Io { .. }
                | Error::Format { .. }
                | Error::DegenerateSample(_)
        )
    }
}
