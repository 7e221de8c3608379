use thiserror::Error;

use crate::wfa::WeightFrame;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not orthogonal: max |M Mᵀ - I| = {deviation:e} exceeds {tol:e}")]
    NotOrthogonal { deviation: f64, tol: f64 },

    #[error("matrix is orthogonal but improper (det = {det})")]
    NotProper { det: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid tolerance {0}: must be > 0")]
    BadTolerance(f64),

    #[error("count {count} out of range [{min}, {max}] for {what}")]
    BadCount {
        what: &'static str,
        count: usize,
        min: usize,
        max: usize,
    },

    #[error("index {index} out of range for cloud of {len} points")]
    BadIndex { index: usize, len: usize },

    #[error("radius must be positive, got {0}")]
    BadRadius(f64),

    #[error("point cloud must contain at least one point")]
    EmptyCloud,

    #[error("normal {index} has norm {norm}, too far from unit length")]
    BadNormal { index: usize, norm: f64 },

    #[error("{expected} normals expected, got {got}")]
    NormalCount { expected: usize, got: usize },

    /// Carries the (fully flagged) frame like [`Error::ZeroBarycenter`].
    #[error("weight covariance is rank deficient: second eigenvalue {lambda2:e} <= {rank_tol:e}")]
    RankDeficientWeights {
        lambda2: f64,
        rank_tol: f64,
        frame: Box<WeightFrame>,
    },

    /// The weight barycenter is (numerically) zero, so the sign rule cannot
    /// orient any axis. The frame is still computed and carried here with
    /// every axis flagged ambiguous.
    #[error("weight barycenter norm {norm:e} is below the sign tolerance")]
    ZeroBarycenter { norm: f64, frame: Box<WeightFrame> },

    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unsupported PLY: {0}")]
    UnsupportedPly(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
