//! Crate-wide error type.

use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("netpbm format error: {0}")]
    Netpbm(String),

    #[error("unexpected frame dimensions {got_rows}x{got_cols}, expected {want}")]
    FrameDims {
        got_rows: usize,
        got_cols: usize,
        want: &'static str,
    },

    #[error("bounding box ({x0},{y0})-({x1},{y1}) out of bitmap bounds {rows}x{cols}")]
    BoxOutOfBounds {
        x0: i32,
        y0: i32,
        x1: i32,
        y1: i32,
        rows: usize,
        cols: usize,
    },

    #[error("moments undefined for an empty region; features require at least one hot pixel")]
    UndefinedMoments,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid model file: {0}")]
    InvalidModel(String),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("track has no class votes")]
    NoVotes,

    #[error("true object count is zero; tracking error is undefined")]
    ZeroTruth,

    #[error("no .pgm frames found in {0}")]
    EmptySequence(PathBuf),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Attach a path to a bare i/o error.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
