use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::linalg::Matrix;
use crate::ols::RegressionResult;
use crate::{Result, StatsError};

/// Significance level for every hypothesis decision.
pub const ALPHA: f64 = 0.05;

/// Outcome of testing H0: coefficient = 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Decision {
    RejectUp,
    RejectDown,
    Keep,
}

impl Decision {
    pub fn as_str(self) -> &'static str {
        match self {
            Decision::RejectUp => "reject_up",
            Decision::RejectDown => "reject_down",
            Decision::Keep => "keep",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Decision::RejectUp => "Reject ↑",
            Decision::RejectDown => "Reject ↓",
            Decision::Keep => "Keep",
        }
    }

    pub fn parse(s: &str) -> Option<Decision> {
        match s {
            "reject_up" => Some(Decision::RejectUp),
            "reject_down" => Some(Decision::RejectDown),
            "keep" => Some(Decision::Keep),
            _ => None,
        }
    }
}

/// Keep when p ≥ α; otherwise reject in the direction of the estimate.
pub fn decide(p_value: f64, alpha: f64, beta: f64) -> Decision {
    if p_value >= alpha || beta == 0.0 || p_value.is_nan() {
        Decision::Keep
    } else if beta > 0.0 {
        Decision::RejectUp
    } else {
        Decision::RejectDown
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientInference {
    pub index: usize,
    pub beta: f64,
    pub se: f64,
    pub t_stat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub p_value: f64,
    pub df: usize,
    pub decision: Decision,
}

impl CoefficientInference {
    /// Rebuilds an inference record from already-reported numbers.
    ///
    /// Only the decision is derived; standard error and t are left NaN.
    pub fn from_reported(beta: f64, ci_low: f64, ci_high: f64, p_value: f64, alpha: f64) -> Self {
        Self {
            index: 1,
            beta,
            se: f64::NAN,
            t_stat: f64::NAN,
            ci_low,
            ci_high,
            p_value,
            df: 0,
            decision: decide(p_value, alpha, beta),
        }
    }
}

/// Two-sided Student-t test and confidence interval for coefficient `j`
/// using the supplied covariance (normally HC3), df = n − p.
pub fn infer_coefficient(
    fit: &RegressionResult,
    cov: &Matrix,
    j: usize,
    alpha: f64,
) -> Result<CoefficientInference> {
    if j >= fit.p {
        return Err(StatsError::IndexOutOfRange { index: j, p: fit.p });
    }
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(StatsError::Invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let beta = fit.beta[j];
    let var = cov.get(j, j);
    let se = var.max(0.0).sqrt();
    let df = fit.df_resid();
    if se == 0.0 {
        if beta != 0.0 {
            return Err(StatsError::DegenerateInference { index: j, beta });
        }
        return Ok(CoefficientInference {
            index: j,
            beta,
            se,
            t_stat: 0.0,
            ci_low: 0.0,
            ci_high: 0.0,
            p_value: 1.0,
            df,
            decision: Decision::Keep,
        });
    }
    let dist = StudentsT::new(0.0, 1.0, df as f64)
        .map_err(|e| StatsError::Invalid(format!("t distribution: {e}")))?;
    let t_stat = beta / se;
    let p_value = (2.0 * dist.cdf(-t_stat.abs())).clamp(0.0, 1.0);
    let crit = dist.inverse_cdf(1.0 - alpha / 2.0);
    Ok(CoefficientInference {
        index: j,
        beta,
        se,
        t_stat,
        ci_low: beta - crit * se,
        ci_high: beta + crit * se,
        p_value,
        df,
        decision: decide(p_value, alpha, beta),
    })
}
