use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("malformed PLY header: {0}")]
    PlyHeader(String),

    #[error("PLY property mismatch at position {index}: expected `{expected}`, found `{found}`")]
    PlyProperty {
        index: usize,
        expected: String,
        found: String,
    },

    #[error("truncated payload: expected {expected} bytes, found {actual}")]
    Truncated { expected: u64, actual: u64 },

    #[error("non-finite value at row {row}, channel `{channel}`")]
    NonFinite { row: usize, channel: String },

    #[error("bad magic {0:?}, expected \"FGC1\"")]
    BadMagic([u8; 4]),

    #[error("unsupported container version {0}")]
    Version(u32),

    #[error("malformed container: {0}")]
    Format(String),

    #[error("plan and payload disagree: {0}")]
    PlanMismatch(String),

    #[error("code {code} out of range for a {bitwidth}-bit channel")]
    CodeOutOfRange { code: u32, bitwidth: u8 },

    #[error("invalid camera: {0}")]
    Camera(String),

    #[error("image dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),

    #[error("image {width}x{height} is smaller than the {window}x{window} SSIM window")]
    ImageTooSmall {
        width: usize,
        height: usize,
        window: usize,
    },

    #[error("row count mismatch: model has {model} rows, scores cover {scores}")]
    RowCountMismatch { model: usize, scores: usize },

    #[error("candidate path is empty")]
    EmptyPath,

    #[error("allocation of {0} bytes failed")]
    Resource(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
