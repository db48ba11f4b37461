use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed WAV: {0}")]
    MalformedWav(String),

    #[error("unsupported WAV encoding: {0}")]
    UnsupportedEncoding(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("invalid sample rate {0}")]
    BadRate(u32),

    #[error("invalid duration {0} s")]
    BadDuration(f64),

    #[error("invalid window length {0}")]
    BadLength(usize),

    #[error("signal of {len} samples is shorter than one frame of {frame_len}")]
    TooShort { len: usize, frame_len: usize },

    #[error("frame length {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("invalid configuration: {0}")]
    BadConfig(String),

    #[error("no frames to summarize")]
    NoFrames,

    #[error("invalid spectral bandwidth order {0}")]
    BadOrder(u32),

    #[error("invalid rolloff fraction {0}")]
    BadPct(f64),

    #[error("invalid mel frequency range [{fmin}, {fmax}] Hz")]
    BadRange { fmin: f64, fmax: f64 },

    #[error("empty corpus: {0}")]
    EmptyCorpus(String),

    #[error("duplicate label {0:?}")]
    DuplicateLabel(String),

    #[error("class {label:?} has {count} rows, need at least 2 to split")]
    ClassTooSmall { label: String, count: usize },

    #[error("need at least 2 rows to fit a scaler, got {0}")]
    TooFewRows(usize),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("invalid layer dimensions {0:?}")]
    BadDims(Vec<usize>),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimMismatch { expected: usize, actual: usize },

    #[error("label id {label} out of range for {n_classes} classes")]
    BadLabel { label: usize, n_classes: usize },

    #[error("parameter shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("training set is empty")]
    EmptyTrainSet,

    #[error("unsupported model version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("corrupt model file: {0}")]
    CorruptModel(String),

    #[error("evaluation set is empty")]
    EmptySet,

    #[error("noise scale must be non-negative, got {0}")]
    BadScale(f64),

    #[error("invalid condition spec: {0}")]
    BadSpec(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error, with any file context stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }
}
