use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid {rows}x{cols}: both dimensions must be at least 1")]
    InvalidGrid { rows: usize, cols: usize },

    #[error("invalid scale r={r} for grid {rows}x{cols}: need 1 <= r <= {max}", max = .rows.min(.cols))]
    InvalidScale { r: usize, rows: usize, cols: usize },

    #[error("invalid block shape {block_rows}x{block_cols} for grid {rows}x{cols}")]
    InvalidBlockShape {
        block_rows: usize,
        block_cols: usize,
        rows: usize,
        cols: usize,
    },

    #[error("scale r={fine} does not divide r={coarse}")]
    NonNestedScales { coarse: usize, fine: usize },

    #[error("invalid dilation factor {0}: must be an integer greater than 1")]
    InvalidLambda(u32),

    #[error("no dilation factors requested")]
    EmptyLambdas,

    #[error("empty matrix")]
    EmptyMatrix,

    #[error("value count {actual} does not match shape {shape:?} (expected {expected})")]
    ValueCount {
        shape: Vec<usize>,
        expected: usize,
        actual: usize,
    },

    #[error("expected a rank-{expected} tensor, got shape {shape:?}")]
    Rank { expected: usize, shape: Vec<usize> },

    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch { left: Vec<usize>, right: Vec<usize> },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("inconsistent partition: {0}")]
    InconsistentPartition(String),

    #[error("point ({i}, {j}) lies outside grid {rows}x{cols}")]
    OutOfGrid {
        i: usize,
        j: usize,
        rows: usize,
        cols: usize,
    },

    #[error("not a permutation of 1..={len}: {reason}")]
    NotAPermutation { len: usize, reason: String },

    #[error("insufficient points for log-log fit: {valid} valid (r, N) pair(s), need 2")]
    InsufficientPoints { valid: usize },

    #[error("intertwiner entry {index} = {value} is not admissible: {reason}")]
    InadmissibleScale {
        index: usize,
        value: f64,
        reason: &'static str,
    },

    #[error("malformed checkpoint header: {0}")]
    MalformedHeader(String),

    #[error(
        "truncated buffer: tensor {name:?} ends at byte {end} but the data buffer holds {len}"
    )]
    TruncatedBuffer {
        name: String,
        end: usize,
        len: usize,
    },

    #[error("unsupported dtype {dtype:?} for tensor {name:?}")]
    UnsupportedDtype { name: String, dtype: String },

    #[error("tensors {first:?} and {second:?} have overlapping byte ranges")]
    OffsetOverlap { first: String, second: String },

    #[error("invalid manifest: {0}")]
    InvalidManifest(String),

    #[error("unknown architecture {0:?} (expected resnet18, vgg16 or simplecnn15)")]
    UnknownArch(String),

    #[error("unknown layer {0:?}")]
    UnknownLayer(String),

    #[error("unknown suite {0:?}")]
    UnknownSuite(String),

    #[error("no analyzable layers (rank-2 or rank-4 tensors) in {0:?}")]
    NoAnalyzableLayers(String),

    #[error("no plot series to emit")]
    EmptySeries,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }

    /// Process exit code: 2 for I/O and parse failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. }
            | Error::Json { .. }
            | Error::MalformedHeader(_)
            | Error::TruncatedBuffer { .. }
            | Error::UnsupportedDtype { .. }
            | Error::OffsetOverlap { .. }
            | Error::InvalidManifest(_) => 2,
            _ => 1,
        }
    }
}
