use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed WAV file: {0}")]
    MalformedWav(String),

    #[error("unsupported WAV encoding: {0}")]
    UnsupportedEncoding(String),

    #[error("I/O failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("buffer is empty")]
    EmptyBuffer,

    #[error("audio too short: {len} samples, need at least {needed}")]
    TooShort { len: usize, needed: usize },

    #[error("sample rate mismatch: {left} Hz vs {right} Hz")]
    RateMismatch { left: u32, right: u32 },

    #[error("shape mismatch for {what}: expected {expected}, got {got}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("dataset contains no windows")]
    EmptyDataset,

    #[error("no input vectors")]
    EmptyInput,

    #[error("non-finite loss at epoch {epoch}")]
    NonFinite { epoch: usize },

    #[error("unsupported format version {found} (supported: {supported})")]
    FormatVersionMismatch { found: String, supported: u32 },

    #[error("corrupt file: {0}")]
    CorruptFile(String),

    #[error("step size must be positive and finite, got {0}")]
    BadStep(f64),

    #[error("curve has {got} values but {expected} windows need blending")]
    CurveLengthMismatch { expected: usize, got: usize },

    #[error("empty curve specification: {0}")]
    EmptySpec(String),

    #[error("feature configuration mismatch: map uses `{map}`, thumbnail uses `{thumbnail}`")]
    ConfigMismatch { map: String, thumbnail: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
