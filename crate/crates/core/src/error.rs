use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),

    #[error("dimension mismatch: expected {expected_w}x{expected_h}, got {got_w}x{got_h}")]
    DimensionMismatch {
        expected_w: u32,
        expected_h: u32,
        got_w: u32,
        got_h: u32,
    },

    #[error("mask is empty")]
    EmptyMask,

    #[error("degenerate bounding box at frame {frame}")]
    DegenerateBBox { frame: usize },

    #[error("no valid occluder placement within {attempts} attempts")]
    PlacementFailed { attempts: u32 },

    #[error("invalid frame count {0}")]
    InvalidFrameCount(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("region {w}x{h} is too small (minimum {min}x{min})")]
    RegionTooSmall { w: u32, h: u32, min: u32 },

    #[error("empty region")]
    EmptyRegion,

    #[error("malformed {what} at byte {offset}: {reason}")]
    Malformed {
        what: &'static str,
        offset: u64,
        reason: String,
    },

    #[error("completer failed on window {window}: {reason}")]
    CompleterFailed { window: usize, reason: String },

    #[error("completer returned {got} frames of {got_w}x{got_h} for window {window}, expected {expected} of {expected_w}x{expected_h}")]
    CompleterShape {
        window: usize,
        expected: usize,
        got: usize,
        expected_w: u32,
        expected_h: u32,
        got_w: u32,
        got_h: u32,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Attach the offending file path to an error.
    pub fn at(self, path: impl Into<PathBuf>) -> Self {
        Error::File {
            path: path.into(),
            source: Box::new(self),
        }
    }

    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_) => true,
            Error::File { source, .. } => source.is_config(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
