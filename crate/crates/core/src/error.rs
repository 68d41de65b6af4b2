use crate::diagnostics::PhaseLabel;

/// Errors raised by the solver library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unsupported dimension {0}: N must be at least 3")]
    UnsupportedDimension(usize),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid exponent: {0}")]
    InvalidExponent(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("direct oracle refused: {points} grid points exceeds the limit of {limit}")]
    OracleRefused { points: usize, limit: usize },
    #[error("nonsmooth exponent: {0}")]
    NonsmoothExponent(String),
    #[error("degenerate field: {0}")]
    DegenerateField(&'static str),
    #[error(
        "refused regime {label}: p+q = {sum} lies outside the existence window ({lower}, {upper})"
    )]
    RefusedRegime {
        label: PhaseLabel,
        sum: f64,
        lower: f64,
        upper: f64,
    },
    #[error("descent stalled after {iterations} iterations: no decrease at step {step:e}")]
    Stalled { iterations: usize, step: f64 },
    #[error("field is not on the constraint manifold: D(w) = {0}")]
    NotOnManifold(f64),
    #[error("shift {0:?} moves the support out of the box")]
    ShiftOutOfRange(Vec<isize>),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("grid too small: {0}")]
    GridTooSmall(String),
    #[error("corrupt snapshot: {0}")]
    CorruptSnapshot(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
