use crate::{Result, StatsError};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged matrix rows");
            data.extend_from_slice(r);
        }
        Self { rows: rows.len(), cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn scale(&self, c: f64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * c).collect() }
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| {
                (0..i).all(|j| {
                    let (a, b) = (self.get(i, j), self.get(j, i));
                    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
                })
            })
    }
}

/// Regression design matrix with named columns; column 0 is normally the intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    names: Vec<String>,
    x: Matrix,
}

impl Design {
    pub fn new<S: Into<String>>(names: Vec<S>, rows: &[Vec<f64>]) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if rows.iter().any(|r| r.len() != names.len()) {
            return Err(StatsError::Invalid(format!(
                "every design row must have {} columns",
                names.len()
            )));
        }
        if let Some(i) = rows.iter().position(|r| r.iter().any(|v| !v.is_finite())) {
            return Err(StatsError::NonFinite(i));
        }
        let x = if rows.is_empty() { Matrix::zeros(0, names.len()) } else { Matrix::from_rows(rows) };
        Ok(Self { names, x })
    }

    /// Prepends an intercept column of ones to the given predictor columns.
    pub fn with_intercept<S: Into<String>>(names: Vec<S>, columns: &[&[f64]]) -> Result<Self> {
        let n = columns.first().map_or(0, |c| c.len());
        if columns.iter().any(|c| c.len() != n) {
            return Err(StatsError::Invalid("predictor columns differ in length".into()));
        }
        let mut all_names = vec!["intercept".to_string()];
        all_names.extend(names.into_iter().map(Into::into));
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| std::iter::once(1.0).chain(columns.iter().map(|c| c[i])).collect())
            .collect();
        Self::new(all_names, &rows)
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn p(&self) -> usize {
        self.x.cols()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn matrix(&self) -> &Matrix {
        &self.x
    }

    /// Names of non-intercept columns whose values never change.
    pub fn constant_columns(&self) -> Vec<&str> {
        (0..self.p())
            .filter(|&j| self.names[j] != "intercept")
            .filter(|&j| {
                let first = self.x.get(0, j);
                self.n() > 0 && (1..self.n()).all(|i| self.x.get(i, j) == first)
            })
            .map(|j| self.names[j].as_str())
            .collect()
    }
}

/// Thin Householder QR of an n×p matrix: X = Q R with Q n×p orthonormal.
pub(crate) struct Qr {
    /// Householder vectors, each of length n − k, unit norm.
    reflectors: Vec<Vec<f64>>,
    /// Upper-triangular p×p factor.
    pub r: Matrix,
    n: usize,
}

impl Qr {
    pub fn decompose(design: &Design) -> Result<Qr> {
        let (n, p) = (design.n(), design.p());
        // column-major working copy
        let mut a: Vec<Vec<f64>> = (0..p).map(|j| (0..n).map(|i| design.x.get(i, j)).collect()).collect();
        let col_norms: Vec<f64> = a.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
        let mut reflectors = Vec::with_capacity(p);
        let mut r = Matrix::zeros(p, p);
        for k in 0..p {
            let norm = a[k][k..].iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm <= 1e-10 * col_norms[k] || col_norms[k] == 0.0 {
                return Err(StatsError::Singular { column: design.names[k].clone() });
            }
            let alpha = if a[k][k] > 0.0 { -norm } else { norm };
            let mut v: Vec<f64> = a[k][k..].to_vec();
            v[0] -= alpha;
            let vnorm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            for x in &mut v {
                *x /= vnorm;
            }
            for col in a.iter_mut().skip(k) {
                let dot: f64 = v.iter().zip(&col[k..]).map(|(a, b)| a * b).sum();
                for (c, vi) in col[k..].iter_mut().zip(&v) {
                    *c -= 2.0 * dot * vi;
                }
            }
            for (j, aj) in a.iter().enumerate().take(p).skip(k) {
                r.set(k, j, aj[k]);
            }
            reflectors.push(v);
        }
        Ok(Qr { reflectors, r, n })
    }

    /// Computes Qᵀb in place (full n-vector).
    pub fn apply_qt(&self, b: &mut [f64]) {
        for (k, v) in self.reflectors.iter().enumerate() {
            let dot: f64 = v.iter().zip(&b[k..]).map(|(a, b)| a * b).sum();
            for (x, vi) in b[k..].iter_mut().zip(v) {
                *x -= 2.0 * dot * vi;
            }
        }
    }

    /// Explicit thin Q, n×p.
    pub fn thin_q(&self) -> Matrix {
        let p = self.reflectors.len();
        let mut q = Matrix::zeros(self.n, p);
        for j in 0..p {
            let mut e = vec![0.0; self.n];
            e[j] = 1.0;
            for (k, v) in self.reflectors.iter().enumerate().rev() {
                let dot: f64 = v.iter().zip(&e[k..]).map(|(a, b)| a * b).sum();
                for (x, vi) in e[k..].iter_mut().zip(v) {
                    *x -= 2.0 * dot * vi;
                }
            }
            for (i, val) in e.into_iter().enumerate() {
                q.set(i, j, val);
            }
        }
        q
    }

    /// Solves R x = b by back substitution.
    pub fn solve_r(&self, b: &[f64]) -> Vec<f64> {
        let p = self.r.rows();
        let mut x = vec![0.0; p];
        for i in (0..p).rev() {
            let s: f64 = (i + 1..p).map(|j| self.r.get(i, j) * x[j]).sum();
            x[i] = (b[i] - s) / self.r.get(i, i);
        }
        x
    }

    /// R⁻¹ as a dense upper-triangular matrix.
    pub fn r_inverse(&self) -> Matrix {
        let p = self.r.rows();
        let mut inv = Matrix::zeros(p, p);
        for j in 0..p {
            let mut e = vec![0.0; p];
            e[j] = 1.0;
            let col = self.solve_r(&e);
            for (i, &v) in col.iter().enumerate() {
                inv.set(i, j, v);
            }
        }
        inv
    }
}

/// A · M · Aᵀ for square p×p operands.
pub(crate) fn sandwich(a: &Matrix, m: &Matrix) -> Matrix {
    let p = a.rows();
    let mut am = Matrix::zeros(p, p);
    for i in 0..p {
        for j in 0..p {
            am.set(i, j, (0..p).map(|k| a.get(i, k) * m.get(k, j)).sum());
        }
    }
    let mut out = Matrix::zeros(p, p);
    for i in 0..p {
        for j in 0..p {
            out.set(i, j, (0..p).map(|k| am.get(i, k) * a.get(j, k)).sum());
        }
    }
    // exact symmetry
    for i in 0..p {
        for j in 0..i {
            let v = 0.5 * (out.get(i, j) + out.get(j, i));
            out.set(i, j, v);
            out.set(j, i, v);
        }
    }
    out
}
