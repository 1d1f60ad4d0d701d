use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the pipeline.
///
/// Variants are grouped by [`ErrorKind`] so front ends can map failures to
/// exit codes without matching every variant.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("unsupported NIfTI datatype code {0}")]
    UnsupportedDataType(i16),
    #[error("malformed input: {0}")]
    Parse(String),
    #[error("invalid resize target {rows}x{cols}; both sides must be at least 2")]
    InvalidTarget { rows: usize, cols: usize },
    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize, usize),
        found: (usize, usize, usize),
    },
    #[error("invalid phantom spec: {0}")]
    InvalidSpec(String),
    #[error("slice position {p} outside 1..={n}")]
    OutOfRange { p: usize, n: usize },
    #[error("image of {rows}x{cols} admits no descriptor keypoint")]
    ImageTooSmall { rows: usize, cols: usize },
    #[error("class {0} has too few samples for a stratified split")]
    EmptyClass(&'static str),
    #[error("feature dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("too few samples: {0}")]
    TooFewSamples(String),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("mean intensity {0} is too small to derive the adjustment gain")]
    ZeroIntensity(f64),
    #[error("mask is empty")]
    EmptyMask,
    #[error("level-set field became non-finite at iteration {iteration}")]
    NonFiniteField { iteration: usize },
    #[error("parameter grid for {0} is empty")]
    EmptyGrid(&'static str),
    #[error("study contains no cases")]
    EmptyStudy,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("missing class label for case {case_id} slice {p}")]
    MissingLabel { case_id: String, p: usize },
}

/// Coarse failure categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numerical,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::NonFiniteField { .. } | Error::ZeroIntensity(_) => ErrorKind::Numerical,
            Error::Config(_) | Error::InvalidTarget { .. } | Error::InvalidSpec(_) | Error::EmptyGrid(_) => {
                ErrorKind::Usage
            }
            _ => ErrorKind::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
