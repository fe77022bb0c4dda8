//! Reference evaluations of the analysis formulas in double-double arithmetic.
//!
//! Everything here is written straight from the defining formulas with no
//! shared code with `apbench-stats`: correlations by direct summation, ranks by
//! an O(n²) counting table, regression by normal equations with Gauss-Jordan
//! elimination, and distribution tails by closed forms. It exists only so
//! tests can compare the production routines against an independent route.

pub mod datasets;
mod dd;

pub use dd::Dd;

fn dd_sum(xs: impl IntoIterator<Item = Dd>) -> Dd {
    xs.into_iter().fold(Dd::ZERO, |acc, x| acc + x)
}

fn mean(xs: &[f64]) -> Dd {
    dd_sum(xs.iter().map(|&x| Dd::from(x))) / Dd::from(xs.len() as f64)
}

/// Pearson r evaluated as Σ(x−x̄)(y−ȳ) / √(Σ(x−x̄)²·Σ(y−ȳ)²).
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let mx = mean(x);
    let my = mean(y);
    let mut sxy = Dd::ZERO;
    let mut sxx = Dd::ZERO;
    let mut syy = Dd::ZERO;
    for (&a, &b) in x.iter().zip(y) {
        let dx = Dd::from(a) - mx;
        let dy = Dd::from(b) - my;
        sxy = sxy + dx * dy;
        sxx = sxx + dx * dx;
        syy = syy + dy * dy;
    }
    (sxy / (sxx * syy).sqrt()).to_f64()
}

/// Average ranks from an explicit counting table: rank = 1 + #less + (#equal − 1)/2.
pub fn rank_table(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&xi| {
            let less = x.iter().filter(|&&xj| xj < xi).count();
            let equal = x.iter().filter(|&&xj| xj == xi).count();
            1.0 + less as f64 + (equal as f64 - 1.0) / 2.0
        })
        .collect()
}

pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    pearson(&rank_table(x), &rank_table(y))
}

/// Full OLS reference solution.
#[derive(Debug, Clone)]
pub struct OlsReference {
    pub beta: Vec<f64>,
    pub residuals: Vec<f64>,
    pub leverages: Vec<f64>,
    pub r_squared: f64,
    pub xtx_inv: Vec<Vec<f64>>,
    pub hc3: Vec<Vec<f64>>,
    beta_dd: Vec<Dd>,
    resid_dd: Vec<Dd>,
}

fn invert(mut a: Vec<Vec<Dd>>) -> Vec<Vec<Dd>> {
    let p = a.len();
    let mut inv: Vec<Vec<Dd>> = (0..p)
        .map(|i| (0..p).map(|j| if i == j { Dd::ONE } else { Dd::ZERO }).collect())
        .collect();
    for col in 0..p {
        let pivot = (col..p)
            .max_by(|&i, &j| a[i][col].abs().to_f64().total_cmp(&a[j][col].abs().to_f64()))
            .unwrap();
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let d = a[col][col];
        assert!(d.to_f64() != 0.0, "singular normal matrix");
        for k in 0..p {
            a[col][k] = a[col][k] / d;
            inv[col][k] = inv[col][k] / d;
        }
        for row in 0..p {
            if row != col {
                let f = a[row][col];
                for k in 0..p {
                    let t = a[col][k];
                    a[row][k] = a[row][k] - f * t;
                    let t = inv[col][k];
                    inv[row][k] = inv[row][k] - f * t;
                }
            }
        }
    }
    inv
}

fn to_f64_matrix(m: &[Vec<Dd>]) -> Vec<Vec<f64>> {
    m.iter().map(|r| r.iter().map(|v| v.to_f64()).collect()).collect()
}

/// OLS via normal equations (XᵀX)β = Xᵀy, with HC3 sandwich covariance.
///
/// `rows` are design-matrix rows, intercept column included by the caller.
pub fn ols(rows: &[Vec<f64>], y: &[f64]) -> OlsReference {
    let n = rows.len();
    let p = rows[0].len();
    let mut xtx = vec![vec![Dd::ZERO; p]; p];
    let mut xty = vec![Dd::ZERO; p];
    for (r, &yi) in rows.iter().zip(y) {
        for a in 0..p {
            let xa = Dd::from(r[a]);
            xty[a] = xty[a] + xa * Dd::from(yi);
            for b in 0..p {
                xtx[a][b] = xtx[a][b] + xa * Dd::from(r[b]);
            }
        }
    }
    let inv = invert(xtx);
    let beta: Vec<Dd> = (0..p)
        .map(|a| dd_sum((0..p).map(|b| inv[a][b] * xty[b])))
        .collect();
    let mut resid = Vec::with_capacity(n);
    let mut lev = Vec::with_capacity(n);
    for (r, &yi) in rows.iter().zip(y) {
        let fit = dd_sum((0..p).map(|a| Dd::from(r[a]) * beta[a]));
        resid.push(Dd::from(yi) - fit);
        let mut h = Dd::ZERO;
        for a in 0..p {
            for b in 0..p {
                h = h + Dd::from(r[a]) * inv[a][b] * Dd::from(r[b]);
            }
        }
        lev.push(h);
    }
    let my = mean(y);
    let sst = dd_sum(y.iter().map(|&v| {
        let d = Dd::from(v) - my;
        d * d
    }));
    let sse = dd_sum(resid.iter().map(|&e| e * e));
    let r_squared = (Dd::ONE - sse / sst).to_f64();

    // meat = Σ eᵢ²/(1−hᵢᵢ)² xᵢxᵢᵀ
    let mut meat = vec![vec![Dd::ZERO; p]; p];
    for ((r, &e), &h) in rows.iter().zip(&resid).zip(&lev) {
        let one_minus = Dd::ONE - h;
        let w = (e * e) / (one_minus * one_minus);
        for a in 0..p {
            for b in 0..p {
                meat[a][b] = meat[a][b] + w * Dd::from(r[a]) * Dd::from(r[b]);
            }
        }
    }
    let mut left = vec![vec![Dd::ZERO; p]; p];
    for a in 0..p {
        for b in 0..p {
            left[a][b] = dd_sum((0..p).map(|k| inv[a][k] * meat[k][b]));
        }
    }
    let mut hc3 = vec![vec![Dd::ZERO; p]; p];
    for a in 0..p {
        for b in 0..p {
            hc3[a][b] = dd_sum((0..p).map(|k| left[a][k] * inv[k][b]));
        }
    }

    OlsReference {
        beta: beta.iter().map(|b| b.to_f64()).collect(),
        residuals: resid.iter().map(|e| e.to_f64()).collect(),
        leverages: lev.iter().map(|h| h.to_f64()).collect(),
        r_squared,
        xtx_inv: to_f64_matrix(&inv),
        hc3: to_f64_matrix(&hc3),
        beta_dd: beta,
        resid_dd: resid,
    }
}

impl OlsReference {
    pub fn residual_dd(&self, i: usize) -> Dd {
        self.resid_dd[i]
    }

    pub fn beta_dd(&self, j: usize) -> Dd {
        self.beta_dd[j]
    }
}

/// Upper tail of χ² with integer degrees of freedom, by the closed-form series.
pub fn chi2_sf(x: f64, df: u32) -> f64 {
    assert!(df >= 1);
    if x <= 0.0 {
        return 1.0;
    }
    let half = x / 2.0;
    if df.is_multiple_of(2) {
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..(df / 2) {
            term *= half / k as f64;
            sum += term;
        }
        libm::exp(-half) * sum
    } else {
        // Q = erfc(√(x/2)) + e^{-x/2} Σ_{k=1}^{(df-1)/2} (x/2)^{k-1/2} / Γ(k+1/2)
        let mut sum = 0.0;
        let mut term = libm::sqrt(half) / libm::tgamma(1.5);
        for k in 1..=((df - 1) / 2) {
            if k > 1 {
                term *= half / (k as f64 - 0.5);
            }
            sum += term;
        }
        libm::erfc(libm::sqrt(half)) + libm::exp(-half) * sum
    }
}

/// Breusch-Pagan LM statistic n·R² of the auxiliary regression of e² on X, with its p-value.
pub fn breusch_pagan(rows: &[Vec<f64>], y: &[f64]) -> (f64, f64) {
    let fit = ols(rows, y);
    let e2: Vec<f64> = (0..y.len())
        .map(|i| {
            let e = fit.residual_dd(i);
            (e * e).to_f64()
        })
        .collect();
    let aux = ols(rows, &e2);
    let lm = y.len() as f64 * aux.r_squared;
    let df = rows[0].len() as u32 - 1;
    (lm, chi2_sf(lm, df))
}

/// π to double-double precision.
const PI: Dd = Dd { hi: std::f64::consts::PI, lo: 1.224_646_799_147_353_2e-16 };

/// erfc(x) in double-double: Maclaurin series of erf for |x| ≤ 3, Lentz
/// continued fraction beyond.
pub fn erfc_dd(x: Dd) -> Dd {
    let ax = x.abs();
    if ax.hi <= 3.0 {
        // erf(x) = 2/√π Σ (−1)^k x^(2k+1) / (k! (2k+1))
        let x2 = x * x;
        let mut power = x;
        let mut sum = x;
        let mut k = 0u32;
        loop {
            k += 1;
            power = -(power * x2) / Dd::from(k as f64);
            let term = power / Dd::from((2 * k + 1) as f64);
            sum = sum + term;
            if term.hi.abs() < 1e-35 * sum.hi.abs().max(1e-300) {
                break;
            }
        }
        let erf = Dd::from(2.0) * sum / PI.sqrt();
        return Dd::ONE - erf;
    }
    // erfc(a) = e^{-a²}/√π · 1/(a + (1/2)/(a + 1/(a + (3/2)/(a + 2/(a + …)))))
    let a = ax;
    let tiny = Dd::from(1e-300);
    let mut f = a;
    let mut c = a;
    let mut d = Dd::ZERO;
    for k in 1..400 {
        let coef = Dd::from(k as f64 / 2.0);
        d = a + coef * d;
        if d.hi == 0.0 {
            d = tiny;
        }
        c = a + coef / c;
        if c.hi == 0.0 {
            c = tiny;
        }
        d = Dd::ONE / d;
        let delta = c * d;
        f = f * delta;
        if (delta - Dd::ONE).hi.abs() < 1e-32 {
            break;
        }
    }
    let tail = (-(a * a)).exp() / (PI.sqrt() * f);
    if x.hi < 0.0 {
        Dd::from(2.0) - tail
    } else {
        tail
    }
}

/// ln Φ(z) in double-double.
pub fn ln_norm_cdf(z: Dd) -> Dd {
    let inv_sqrt2 = Dd::ONE / Dd::from(2.0).sqrt();
    (Dd::from(0.5) * erfc_dd(-(z * inv_sqrt2))).ln()
}

/// Anderson-Darling normality statistic with estimated mean and sd.
///
/// Returns (A², A*², p) where A*² = A²(1 + 0.75/n + 2.25/n²) and p follows the
/// D'Agostino & Stephens (1986) piecewise approximation.
pub fn anderson_darling(sample: &[f64]) -> (f64, f64, f64) {
    let n = sample.len();
    let m = mean(sample);
    let ss = dd_sum(sample.iter().map(|&v| {
        let d = Dd::from(v) - m;
        d * d
    }));
    let sd = (ss / Dd::from(n as f64 - 1.0)).sqrt();
    let mut z: Vec<Dd> = sample.iter().map(|&v| (Dd::from(v) - m) / sd).collect();
    z.sort_by(|a, b| (*a - *b).hi.total_cmp(&0.0));
    let lncdf: Vec<Dd> = z.iter().map(|&zi| ln_norm_cdf(zi)).collect();
    let lnsf: Vec<Dd> = z.iter().map(|&zi| ln_norm_cdf(-zi)).collect();
    let mut s = Dd::ZERO;
    for i in 1..=n {
        s = s + Dd::from((2 * i - 1) as f64) * (lncdf[i - 1] + lnsf[n - i]);
    }
    let nd = Dd::from(n as f64);
    let a2 = (Dd::ZERO - nd - s / nd).to_f64();
    let nf = n as f64;
    let a2s = a2 * (1.0 + 0.75 / nf + 2.25 / (nf * nf));
    let p = if a2s >= 0.6 {
        libm::exp(1.2937 - 5.709 * a2s + 0.0186 * a2s * a2s)
    } else if a2s >= 0.34 {
        libm::exp(0.9177 - 4.279 * a2s - 1.38 * a2s * a2s)
    } else if a2s >= 0.2 {
        1.0 - libm::exp(-8.318 + 42.796 * a2s - 59.938 * a2s * a2s)
    } else {
        1.0 - libm::exp(-13.436 + 101.14 * a2s - 223.73 * a2s * a2s)
    };
    (a2, a2s, p.clamp(0.0, 1.0))
}

/// Relative error |a − b| / |b|, falling back to absolute error when b is zero.
pub fn rel_err(actual: f64, expected: f64) -> f64 {
    let d = (actual - expected).abs();
    if expected == 0.0 {
        d
    } else {
        d / expected.abs()
    }
}

/// Matrix error normalised by the largest reference entry.
pub fn matrix_rel_err(actual: &[Vec<f64>], expected: &[Vec<f64>]) -> f64 {
    let scale = expected
        .iter()
        .flatten()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let worst = actual
        .iter()
        .flatten()
        .zip(expected.iter().flatten())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if scale == 0.0 {
        worst
    } else {
        worst / scale
    }
}
