//! Error types shared across the pipeline.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported or corrupt image {path}: {reason}")]
    ImageFormat { path: PathBuf, reason: String },
    #[error("zero-sized image")]
    EmptyImage,
    #[error("invalid iris geometry: {0}")]
    Geometry(String),
    #[error("no dark pupil region found; supply the circle geometry manually")]
    NoPupil,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("image {rows}x{cols} is smaller than the {min}-pixel filter support")]
    FilterSupport { rows: usize, cols: usize, min: usize },
    #[error("degenerate contour: {0}")]
    Contour(String),
    #[error("feature sample {value} lies outside [0, 1]")]
    SampleRange { value: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("evaluation: {0}")]
    Eval(String),
}

/// Typed failures of the binary shape-code format. Every corruption of a
/// serialized template must surface as one of these, never as a wrong code.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodecError {
    #[error("bad magic bytes")]
    BadMagic,
    #[error("unsupported format version {0}")]
    Version(u8),
    #[error("unknown flag bits 0x{0:02x}")]
    Flags(u8),
    #[error("invalid header field: {0}")]
    Header(String),
    #[error("truncated stream: expected {expected} bytes, got {got}")]
    Truncated { expected: usize, got: usize },
    #[error("{0} trailing bytes after checksum")]
    Trailing(usize),
    #[error("checksum mismatch: stored {stored:08x}, computed {computed:08x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("sample {index} value {value} exceeds the {bits}-bit range")]
    SampleRange { index: usize, value: u16, bits: u8 },
}
