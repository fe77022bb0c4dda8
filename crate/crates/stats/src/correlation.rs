use crate::sum::{kmean, ksum};
use crate::{Result, StatsError};

/// Pearson and Spearman coefficients for the same pair of series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationPair {
    pub pearson_r: f64,
    pub spearman_rho: f64,
    /// Both coefficients point the same way (or are both zero).
    pub sign_agreement: bool,
}

impl CorrelationPair {
    pub fn new(pearson_r: f64, spearman_rho: f64) -> Self {
        let sign_agreement =
            pearson_r * spearman_rho > 0.0 || (pearson_r == 0.0 && spearman_rho == 0.0);
        Self { pearson_r, spearman_rho, sign_agreement }
    }
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch { left: x.len(), right: y.len() });
    }
    if x.len() < 3 {
        return Err(StatsError::TooFewObservations { needed: 3, got: x.len() });
    }
    if let Some(i) = x.iter().chain(y).position(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite(i % x.len()));
    }
    Ok(())
}

/// Pearson product-moment correlation.
///
/// Zero variance in either input is reported as an error rather than 0.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let mx = kmean(x);
    let my = kmean(y);
    let sxy = ksum(x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)));
    let sxx = ksum(x.iter().map(|a| (a - mx) * (a - mx)));
    let syy = ksum(y.iter().map(|b| (b - my) * (b - my)));
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::ZeroVariance("pearson correlation"));
    }
    let prod = sxx * syy;
    let denom = if prod.is_finite() && prod > 0.0 { prod.sqrt() } else { sxx.sqrt() * syy.sqrt() };
    Ok((sxy / denom).clamp(-1.0, 1.0))
}

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && x[order[end]] == x[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let rank = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = rank;
        }
        start = end;
    }
    ranks
}

/// Spearman rank correlation: Pearson of the average-rank transforms.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    pearson(&average_ranks(x), &average_ranks(y))
        .map_err(|_| StatsError::ZeroVariance("spearman correlation"))
}

pub fn correlate(x: &[f64], y: &[f64]) -> Result<CorrelationPair> {
    Ok(CorrelationPair::new(pearson(x, y)?, spearman(x, y)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_lines() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        assert!((pearson(&x, &y).unwrap() - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn monotone_nonlinear_spearman_is_one() {
        let x: Vec<f64> = (1..20).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| v.powi(3) + (v / 5.0).exp()).collect();
        assert_eq!(spearman(&x, &y).unwrap(), 1.0);
    }

    #[test]
    fn tie_ranks() {
        assert_eq!(average_ranks(&[1.0, 2.0, 2.0, 3.0]), vec![1.0, 2.5, 2.5, 4.0]);
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 3.0]), vec![3.0, 1.0, 3.0, 3.0]);
    }

    #[test]
    fn zero_variance_is_undefined() {
        assert!(matches!(
            pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(StatsError::ZeroVariance(_))
        ));
        assert!(spearman(&[2.0; 4], &[1.0, 2.0, 3.0, 4.0]).is_err());
    }

    #[test]
    fn short_or_mismatched_input() {
        assert!(pearson(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn sign_agreement_flag() {
        assert!(CorrelationPair::new(0.3, 0.1).sign_agreement);
        assert!(!CorrelationPair::new(0.6, -0.2).sign_agreement);
        assert!(CorrelationPair::new(0.0, 0.0).sign_agreement);
        assert!(!CorrelationPair::new(0.0, 0.2).sign_agreement);
    }
}
