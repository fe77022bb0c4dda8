use crate::sum::kmean;
use crate::{Result, StatsError};

/// Mean, minimum and maximum of one metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescriptiveStats {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

pub fn descriptive(series: &[f64]) -> Result<DescriptiveStats> {
    if series.is_empty() {
        return Err(StatsError::TooFewObservations { needed: 1, got: 0 });
    }
    if let Some(i) = series.iter().position(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite(i));
    }
    let min = series.iter().copied().fold(f64::INFINITY, f64::min);
    let max = series.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // rounding can push the compensated mean a hair outside [min, max] for constant input
    let mean = kmean(series).clamp(min, max);
    Ok(DescriptiveStats { mean, min, max, count: series.len() })
}
