use std::io;

use thiserror::Error;

use crate::space::Space;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("space mismatch: expected {expected}, got {found}")]
    SpaceMismatch { expected: Space, found: Space },

    #[error("point has {found} coordinates but the space has dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("toral automorphism matrix has determinant {det}, expected +1 or -1")]
    NotUnimodular { det: i64 },

    #[error("composition of maps must be non-empty")]
    EmptyComposition,

    #[error("rate table has {len} entries but index {index} was requested")]
    RateTableTooShort { len: usize, index: u64 },

    #[error("grid with {cells} cells exceeds the 2^26 cell cap")]
    GridTooLarge { cells: u128 },

    #[error("forward array is not a bijection of 0..{cells}: {reason}")]
    NotABijection { cells: usize, reason: String },

    #[error("delta {delta} too small at this resolution: no cube of >= 2 cells fits; minimum feasible delta is anything above {min_delta}")]
    DeltaTooSmall { delta: f64, min_delta: f64 },

    #[error("cover was built for a different grid than the permutation")]
    CoverMismatch,

    #[error("box {name} is not aligned to the grid: {reason}")]
    Misaligned { name: &'static str, reason: String },

    #[error("observable must be scalar (codomain dimension 1), got {dim}")]
    NotScalar { dim: usize },

    #[error("too few horizon points: need {required} spanning at least two decades, got {found}")]
    TooFewHorizons { required: usize, found: String },

    #[error("guarantee violated: {0}")]
    GuaranteeViolated(String),

    #[error("bad permutation file: {0}")]
    BadFormat(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }
}
