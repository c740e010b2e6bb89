use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("polynomial mixes even and odd monomials")]
    MixedParity,
    #[error("state space dimension {dim} exceeds cap {cap}")]
    DimensionCap { dim: usize, cap: usize },
    #[error("fermionic operators {0} and {1} sit at the same contour time")]
    TieAtEqualTime(usize, usize),
    #[error("truncation {trunc} too small for {needed} creation insertions")]
    Truncation { trunc: usize, needed: usize },
    #[error("grid does not resolve omega = {omega} (need omega*dt <= pi/4, got {ratio})")]
    Nyquist { omega: f64, ratio: f64 },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("unknown label: {0}")]
    UnknownLabel(String),
    #[error("{0} exceeds cap {1}")]
    Cap(&'static str, usize),
    #[error("statistics mismatch: {0}")]
    Statistics(String),
    #[error("overlapping contraction pairs")]
    Overlap,
    #[error("invariant violation: {0}")]
    Invariant(String),
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
}
