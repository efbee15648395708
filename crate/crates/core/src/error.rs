use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid frame: {0}")]
    InvalidFrame(String),

    #[error("bounding box {x0},{y0} {w}x{h} does not fit a {width}x{height} frame")]
    BoxOutOfBounds {
        x0: usize,
        y0: usize,
        w: usize,
        h: usize,
        width: usize,
        height: usize,
    },

    #[error("invalid moment index (m={m}, n={n}): need |n| <= m and m - |n| even")]
    InvalidMomentIndex { m: u32, n: i32 },

    #[error("moment order {0} exceeds the supported maximum")]
    OrderTooLarge(u32),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("signal has {len} samples, shorter than one {frame_len}-sample frame")]
    SignalTooShort { len: usize, frame_len: usize },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("PCA needs at least 2 training vectors, got {0}")]
    TooFewSamples(usize),

    #[error("requested {requested} components, at most {max} allowed")]
    TooManyComponents { requested: usize, max: usize },

    #[error("training data is degenerate: no component has a nonzero eigenvalue")]
    NoComponents,

    #[error("unknown class label {0:?}")]
    UnknownLabel(String),

    #[error("manifest line {line}: {message}")]
    ManifestParse { line: usize, message: String },

    #[error("duplicate utterance id {0:?}")]
    DuplicateId(String),

    #[error("record {0:?} has neither frames_dir nor audio_path")]
    NoMedia(String),

    #[error("record {0:?} has an empty label")]
    EmptyLabel(String),

    #[error("missing media: {}", format_missing(.0))]
    MissingMedia(Vec<(String, PathBuf)>),

    #[error("class {label:?} has {count} record(s); stratified split needs at least 2")]
    ClassTooSmall { label: String, count: usize },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("{path}: {source}")]
    Wav {
        path: PathBuf,
        #[source]
        source: hound::Error,
    },
}

fn format_missing(entries: &[(String, PathBuf)]) -> String {
    entries
        .iter()
        .map(|(id, path)| format!("{id}: {}", path.display()))
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
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
}
