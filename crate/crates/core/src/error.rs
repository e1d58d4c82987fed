use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    #[error("layer {layer}: output dimension would be non-positive")]
    EmptyOutput { layer: String },

    #[error("invalid layer: {0}")]
    InvalidLayer(String),

    #[error("invalid network descriptor: {0}")]
    InvalidNetwork(String),

    #[error("layer {index} is not spatial ({kind})")]
    NonSpatialLayer { index: usize, kind: &'static str },

    #[error("invalid search parameters: {0}")]
    InvalidSearch(String),

    #[error("frame too small: {0}")]
    FrameTooSmall(String),

    #[error("malformed sparse activation: {0}")]
    MalformedStream(String),

    #[error("coordinate ({y}, {x}) out of bounds for {height}x{width}")]
    OutOfBounds {
        y: usize,
        x: usize,
        height: usize,
        width: usize,
    },

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("corrupted pipeline state: {0}")]
    CorruptedState(String),

    #[error("invalid cost input: {0}")]
    InvalidCost(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn shape_mismatch(expected: impl ToString, actual: impl ToString) -> Error {
    Error::ShapeMismatch {
        expected: expected.to_string(),
        actual: actual.to_string(),
    }
}
