//! Statistical routines used to relate response time to CPU and DRAM power.
//!
//! All functions are pure and operate on plain slices or on [`Design`]
//! matrices; nothing here knows about traces, files or services.

mod correlation;
mod descriptive;
mod diagnostics;
mod energy;
mod error;
mod inference;
mod linalg;
mod ols;
mod sum;

pub use correlation::{average_ranks, correlate, pearson, spearman, CorrelationPair};
pub use descriptive::{descriptive, DescriptiveStats};
pub use diagnostics::{anderson_darling, breusch_pagan, DiagnosticResult, DiagnosticTest};
pub use energy::trapezoid_energy;
pub use error::StatsError;
pub use inference::{decide, infer_coefficient, CoefficientInference, Decision, ALPHA};
pub use linalg::{Design, Matrix};
pub use ols::{hc3_covariance, ols_fit, RegressionResult};

pub type Result<T> = std::result::Result<T, StatsError>;
