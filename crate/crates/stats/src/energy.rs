use crate::sum::ksum;
use crate::{Result, StatsError};

/// Integrates a sampled power series (seconds, watts) to joules with the trapezoidal rule.
pub fn trapezoid_energy(series: &[(f64, f64)]) -> Result<f64> {
    if series.len() < 2 {
        return Err(StatsError::TooFewObservations { needed: 2, got: series.len() });
    }
    if let Some(i) = series.iter().position(|(t, p)| !t.is_finite() || !p.is_finite()) {
        return Err(StatsError::NonFinite(i));
    }
    if let Some(i) = series.windows(2).position(|w| w[1].0 <= w[0].0) {
        return Err(StatsError::Unsorted(i + 1));
    }
    Ok(ksum(series.windows(2).map(|w| (w[0].1 + w[1].1) / 2.0 * (w[1].0 - w[0].0))))
}
