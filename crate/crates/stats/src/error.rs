use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("need at least {needed} observations, got {got}")]
    TooFewObservations { needed: usize, got: usize },
    #[error("series lengths differ ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("{0} is undefined for zero-variance input")]
    ZeroVariance(&'static str),
    #[error("design matrix is rank deficient: column `{column}` is a linear combination of earlier columns")]
    Singular { column: String },
    #[error("observation {index} has leverage 1; HC3 weight is undefined")]
    UnitLeverage { index: usize },
    #[error("standard error of coefficient {index} is zero while its estimate is {beta}")]
    DegenerateInference { index: usize, beta: f64 },
    #[error("coefficient index {index} out of range for {p} coefficients")]
    IndexOutOfRange { index: usize, p: usize },
    #[error("time stamps must be strictly increasing (violated at sample {0})")]
    Unsorted(usize),
    #[error("non-finite value at position {0}")]
    NonFinite(usize),
    #[error("{0}")]
    Invalid(String),
}
