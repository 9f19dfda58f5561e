//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point maps to infinity")]
    PointAtInfinity,

    #[error("singular homography (|det| = {det:e})")]
    SingularHomography { det: f64 },

    #[error("degenerate quad: {reason}")]
    DegenerateQuad { reason: String },

    #[error("invalid ROI {id}: {reason}")]
    InvalidRoi { id: u32, reason: String },

    #[error("initial ROI at index {index} (id {id}) rejected: {reason}")]
    InvalidInitialRoi {
        index: usize,
        id: u32,
        reason: String,
    },

    #[error("frame dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),

    #[error("unsupported channel count {0} (expected 1 or 3)")]
    UnsupportedChannels(usize),

    #[error("frame data length {got} does not match {width}x{height}x{channels}")]
    BadFrameData {
        width: usize,
        height: usize,
        channels: usize,
        got: usize,
    },

    #[error("frame {0}x{1} is too small (minimum {2}x{2})")]
    FrameTooSmall(usize, usize, usize),

    #[error("no flow samples inside the region")]
    NoSamples,

    #[error("empty frame sequence")]
    EmptyFrameSequence,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(
        "could not place {placed} of {requested} ROIs after {attempts} attempts: {constraint}"
    )]
    RoiPlacement {
        requested: usize,
        placed: usize,
        attempts: usize,
        constraint: String,
    },

    #[error("trajectory does not match ground truth: {0}")]
    TruthMismatch(String),

    #[error("frame-count mismatch between tracking and data sources: {tracking} vs {data}")]
    FrameCountMismatch { tracking: usize, data: usize },

    #[error("{path}: {reason}")]
    BadInput { path: PathBuf, reason: String },

    #[error("mixed frame dimensions: {first} is {fw}x{fh} but {other} is {ow}x{oh}")]
    MixedDimensions {
        first: PathBuf,
        fw: usize,
        fh: usize,
        other: PathBuf,
        ow: usize,
        oh: usize,
    },

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

    #[error("{path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, reason: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            reason: reason.into(),
        }
    }
}
