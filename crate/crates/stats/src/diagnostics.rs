use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::linalg::Design;
use crate::ols::{ols_fit, RegressionResult};
use crate::sum::{kmean, ksum};
use crate::{Result, StatsError, ALPHA};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagnosticTest {
    BreuschPagan,
    AndersonDarling,
}

impl DiagnosticTest {
    pub fn as_str(self) -> &'static str {
        match self {
            DiagnosticTest::BreuschPagan => "breusch_pagan",
            DiagnosticTest::AndersonDarling => "anderson_darling",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticResult {
    pub test: DiagnosticTest,
    pub statistic: f64,
    pub p_value: f64,
    pub null_rejected: bool,
}

impl DiagnosticResult {
    fn new(test: DiagnosticTest, statistic: f64, p_value: f64) -> Self {
        let p_value = p_value.clamp(0.0, 1.0);
        Self { test, statistic, p_value, null_rejected: p_value < ALPHA }
    }
}

/// Breusch-Pagan LM test: n·R² of e² regressed on the original design,
/// referred to χ² with p − 1 degrees of freedom.
pub fn breusch_pagan(fit: &RegressionResult, design: &Design) -> Result<DiagnosticResult> {
    if design.n() != fit.n || design.p() != fit.p {
        return Err(StatsError::Invalid("design does not match the fitted model".into()));
    }
    if fit.p < 2 {
        return Err(StatsError::Invalid("Breusch-Pagan needs at least one non-intercept regressor".into()));
    }
    let e2: Vec<f64> = fit.residuals.iter().map(|e| e * e).collect();
    let mean_e2 = kmean(&e2);
    let spread = ksum(e2.iter().map(|v| (v - mean_e2) * (v - mean_e2)));
    let exact_fit = fit.sse() <= 1e-20 * fit.sst;
    if exact_fit || mean_e2 == 0.0 || spread <= (1e-12 * mean_e2).powi(2) * e2.len() as f64 {
        // residuals are zero up to rounding, or constant: nothing to explain
        return Ok(DiagnosticResult::new(DiagnosticTest::BreuschPagan, 0.0, 1.0));
    }
    let aux = ols_fit(design, &e2)
        .map_err(|e| StatsError::Invalid(format!("degenerate auxiliary regression: {e}")))?;
    let lm = (fit.n as f64 * aux.r_squared).max(0.0);
    let df = (fit.p - 1) as f64;
    let chi = ChiSquared::new(df).map_err(|e| StatsError::Invalid(format!("chi-squared: {e}")))?;
    Ok(DiagnosticResult::new(DiagnosticTest::BreuschPagan, lm, chi.sf(lm)))
}

/// ln Φ(z), stable far into the lower tail.
///
/// Uses the musl-derived `libm::erfc` (sub-ulp); statrs' erfc drifts to ~1e-10
/// relative error near 0.5, which the n²-weighted A² sum amplifies.
fn ln_norm_cdf(z: f64) -> f64 {
    if z > -30.0 {
        (0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)).ln()
    } else {
        // Mills-ratio asymptotic expansion
        let z2 = z * z;
        -0.5 * z2 - (-z * (2.0 * std::f64::consts::PI).sqrt()).ln()
            + (1.0 - 1.0 / z2 + 3.0 / (z2 * z2)).ln()
    }
}

/// Anderson-Darling normality test with mean and variance estimated from the sample.
///
/// The reported statistic is the small-sample adjusted A*² = A²(1 + 0.75/n + 2.25/n²).
/// p-values use the piecewise exponential fit of D'Agostino & Stephens,
/// *Goodness-of-Fit Techniques* (1986), Table 4.9:
///
/// | A*²          | p                                         |
/// |--------------|-------------------------------------------|
/// | ≥ 0.6        | exp(1.2937 − 5.709 A*² + 0.0186 A*⁴)      |
/// | [0.34, 0.6)  | exp(0.9177 − 4.279 A*² − 1.38 A*⁴)        |
/// | [0.2, 0.34)  | 1 − exp(−8.318 + 42.796 A*² − 59.938 A*⁴) |
/// | < 0.2        | 1 − exp(−13.436 + 101.14 A*² − 223.73 A*⁴) |
pub fn anderson_darling(residuals: &[f64]) -> Result<DiagnosticResult> {
    let n = residuals.len();
    if n < 8 {
        return Err(StatsError::TooFewObservations { needed: 8, got: n });
    }
    if let Some(i) = residuals.iter().position(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite(i));
    }
    let mean = kmean(residuals);
    let var = ksum(residuals.iter().map(|v| (v - mean) * (v - mean))) / (n - 1) as f64;
    let sd = var.sqrt();
    if sd == 0.0 {
        return Err(StatsError::ZeroVariance("Anderson-Darling test"));
    }
    let mut z: Vec<f64> = residuals.iter().map(|v| (v - mean) / sd).collect();
    z.sort_by(f64::total_cmp);
    let s = ksum((1..=n).map(|i| {
        let w = (2 * i - 1) as f64;
        // ln(1 − Φ(z)) = ln Φ(−z)
        w * (ln_norm_cdf(z[i - 1]) + ln_norm_cdf(-z[n - i]))
    }));
    let nf = n as f64;
    let a2 = -nf - s / nf;
    let a2s = a2 * (1.0 + 0.75 / nf + 2.25 / (nf * nf));
    let p = if a2s >= 0.6 {
        (1.2937 - 5.709 * a2s + 0.0186 * a2s * a2s).exp()
    } else if a2s >= 0.34 {
        (0.9177 - 4.279 * a2s - 1.38 * a2s * a2s).exp()
    } else if a2s >= 0.2 {
        1.0 - (-8.318 + 42.796 * a2s - 59.938 * a2s * a2s).exp()
    } else {
        1.0 - (-13.436 + 101.14 * a2s - 223.73 * a2s * a2s).exp()
    };
    Ok(DiagnosticResult::new(DiagnosticTest::AndersonDarling, a2s, p))
}
