use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },
    #[error("matrix is not self-adjoint (relative asymmetry {asymmetry:e})")]
    NotSelfAdjoint { asymmetry: f64 },
    #[error("tangent vectors are attached to different base points")]
    BasePointMismatch,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("frame has numerical rank {rank} < {expected}")]
    RankDeficient { rank: usize, expected: usize },
    #[error("matrix is numerically singular (condition number {condition:e})")]
    Singular { condition: f64 },
    #[error("density exponent {exponent} overflows; use the log form")]
    Overflow { exponent: f64 },
    #[error("invalid empirical measure: {0}")]
    InvalidMeasure(String),
    #[error("invalid solver options: {0}")]
    InvalidOptions(String),
    #[error("converged runs disagree: distance {distance:e}")]
    InconsistentRuns { distance: f64 },
    #[error("sample too large for exact enumeration ({subsets} candidate subsets)")]
    SampleTooLarge { subsets: u128 },
    #[error("enumeration guard exceeded: {0}")]
    TooLarge(String),
    #[error("value out of range: {0}")]
    OutOfRange(String),
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),
}
