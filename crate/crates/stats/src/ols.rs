use crate::linalg::{sandwich, Design, Matrix, Qr};
use crate::sum::{kmean, ksum};
use crate::{Result, StatsError};

/// A fitted ordinary least squares model.
#[derive(Debug, Clone)]
pub struct RegressionResult {
    /// Coefficients in design column order, intercept first.
    pub beta: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Hat-matrix diagonal hᵢᵢ = xᵢᵀ(XᵀX)⁻¹xᵢ.
    pub leverages: Vec<f64>,
    /// (XᵀX)⁻¹
    pub xtx_inv: Matrix,
    /// s²(XᵀX)⁻¹ with s² = SSE/(n − p).
    pub classical_cov: Matrix,
    pub n: usize,
    pub p: usize,
    pub r_squared: f64,
    /// Total sum of squares of y around its mean.
    pub sst: f64,
    pub names: Vec<String>,
    q: Matrix,
    r_inv: Matrix,
}

impl RegressionResult {
    pub fn df_resid(&self) -> usize {
        self.n - self.p
    }

    pub fn sse(&self) -> f64 {
        ksum(self.residuals.iter().map(|e| e * e))
    }

    pub fn classical_se(&self, j: usize) -> f64 {
        self.classical_cov.get(j, j).sqrt()
    }
}

/// Least-squares fit by Householder QR.
///
/// Requires n > p and full column rank; a rank-deficient design reports the
/// first column that adds no new direction.
pub fn ols_fit(design: &Design, y: &[f64]) -> Result<RegressionResult> {
    let (n, p) = (design.n(), design.p());
    if y.len() != n {
        return Err(StatsError::LengthMismatch { left: n, right: y.len() });
    }
    if n <= p {
        return Err(StatsError::TooFewObservations { needed: p + 1, got: n });
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite(i));
    }
    let qr = Qr::decompose(design)?;
    let mut qty = y.to_vec();
    qr.apply_qt(&mut qty);
    let beta = qr.solve_r(&qty[..p]);

    let x = design.matrix();
    let residuals: Vec<f64> = (0..n)
        .map(|i| y[i] - ksum(x.row(i).iter().zip(&beta).map(|(a, b)| a * b)))
        .collect();
    let q = qr.thin_q();
    let leverages: Vec<f64> = (0..n).map(|i| q.row(i).iter().map(|v| v * v).sum()).collect();

    let r_inv = qr.r_inverse();
    let xtx_inv = sandwich(&r_inv, &identity(p));
    let sse = ksum(residuals.iter().map(|e| e * e));
    let s2 = sse / (n - p) as f64;
    let classical_cov = xtx_inv.scale(s2);

    let my = kmean(y);
    let sst = ksum(y.iter().map(|v| (v - my) * (v - my)));
    // no variation to explain: report 0 rather than an arbitrary ratio of rounding noise
    let r_squared = if sst > 0.0 { 1.0 - sse / sst } else { 0.0 };

    Ok(RegressionResult {
        beta,
        residuals,
        leverages,
        xtx_inv,
        classical_cov,
        n,
        p,
        r_squared,
        sst,
        names: design.names().to_vec(),
        q,
        r_inv,
    })
}

fn identity(p: usize) -> Matrix {
    let mut m = Matrix::zeros(p, p);
    for i in 0..p {
        m.set(i, i, 1.0);
    }
    m
}

/// HC3 sandwich covariance (XᵀX)⁻¹ Xᵀ diag(eᵢ²/(1−hᵢᵢ)²) X (XᵀX)⁻¹.
///
/// Evaluated as R⁻¹ (Σ ωᵢ qᵢqᵢᵀ) R⁻ᵀ using the thin Q rows of the fit, which
/// avoids squaring the condition number of X.
pub fn hc3_covariance(fit: &RegressionResult, design: &Design) -> Result<Matrix> {
    if design.n() != fit.n || design.p() != fit.p {
        return Err(StatsError::Invalid(format!(
            "design is {}×{} but the fit was {}×{}",
            design.n(),
            design.p(),
            fit.n,
            fit.p
        )));
    }
    let p = fit.p;
    let mut meat = Matrix::zeros(p, p);
    for (i, (&e, &h)) in fit.residuals.iter().zip(&fit.leverages).enumerate() {
        let one_minus = 1.0 - h;
        if one_minus <= 1e-10 {
            return Err(StatsError::UnitLeverage { index: i });
        }
        let w = (e / one_minus) * (e / one_minus);
        if w == 0.0 {
            continue;
        }
        let qi = fit.q.row(i);
        for a in 0..p {
            for b in 0..=a {
                let v = meat.get(a, b) + w * qi[a] * qi[b];
                meat.set(a, b, v);
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            meat.set(b, a, meat.get(a, b));
        }
    }
    Ok(sandwich(&fit.r_inv, &meat))
}
