//! Compares every statistical routine against the double-double reference.
//!
//! Shared by the stats crate's own tests and the workspace acceptance suite.

use apbench_oracle as oracle;
use apbench_oracle::datasets::{power_dataset, tied_pair};
use apbench_stats::{
    anderson_darling, breusch_pagan, hc3_covariance, ols_fit, pearson, spearman, Design, Matrix,
};

/// Worst relative error observed for one routine on one dataset.
#[derive(Debug, Clone)]
pub struct Check {
    pub routine: &'static str,
    pub n: usize,
    pub seed: u64,
    pub worst_rel_err: f64,
}

/// (seed, n) pairs used for the equivalence sweep.
pub const DATASETS: [(u64, usize); 6] =
    [(11, 4), (12, 8), (13, 20), (14, 100), (15, 1000), (16, 5000)];

fn max_rel(actual: &[f64], expected: &[f64]) -> f64 {
    actual
        .iter()
        .zip(expected)
        .map(|(a, e)| oracle::rel_err(*a, *e))
        .fold(0.0, f64::max)
}

/// Covariance error with each entry scaled by √(VᵢᵢVⱼⱼ), so columns of very
/// different magnitude are judged on the same footing.
fn cov_rel(actual: &Matrix, expected: &[Vec<f64>]) -> f64 {
    let p = expected.len();
    let mut worst = 0.0f64;
    for i in 0..p {
        for j in 0..p {
            let scale = (expected[i][i] * expected[j][j]).sqrt();
            let d = (actual.get(i, j) - expected[i][j]).abs();
            worst = worst.max(if scale > 0.0 { d / scale } else { d });
        }
    }
    worst
}

pub fn run(seed: u64, n: usize) -> Vec<Check> {
    let ds = power_dataset(seed, n);
    let rows = ds.rows();
    let mut names = vec!["intercept"];
    names.extend(ds.names.iter().copied());
    let design = Design::new(names, &rows).expect("design");
    let mut out = Vec::new();
    let mut push = |routine, err| out.push(Check { routine, n, seed, worst_rel_err: err });

    if n >= 3 {
        let x = &ds.columns[0];
        let r = pearson(x, &ds.y).expect("pearson");
        push("pearson", oracle::rel_err(r, oracle::pearson(x, &ds.y)));
        let (tx, ty) = tied_pair(seed, n);
        let rho = spearman(&tx, &ty).expect("spearman");
        push("spearman", oracle::rel_err(rho, oracle::spearman(&tx, &ty)));
    }

    let fit = ols_fit(&design, &ds.y).expect("ols");
    let reference = oracle::ols(&rows, &ds.y);
    push(
        "ols_fit",
        max_rel(&fit.beta, &reference.beta).max(max_rel(&fit.leverages, &reference.leverages)),
    );
    let v = hc3_covariance(&fit, &design).expect("hc3");
    push("hc3_covariance", cov_rel(&v, &reference.hc3));

    let bp = breusch_pagan(&fit, &design).expect("breusch-pagan");
    let (lm, p) = oracle::breusch_pagan(&rows, &ds.y);
    push("breusch_pagan", oracle::rel_err(bp.statistic, lm).max(oracle::rel_err(bp.p_value, p)));

    if n >= 8 {
        // same input vector for both routes; A² amplifies input differences by ~n
        let ad = anderson_darling(&fit.residuals).expect("anderson-darling");
        let (_, a2s, p) = oracle::anderson_darling(&fit.residuals);
        push("anderson_darling", oracle::rel_err(ad.statistic, a2s).max(oracle::rel_err(ad.p_value, p)));
    }
    out
}

pub fn run_all() -> Vec<Check> {
    DATASETS.iter().flat_map(|&(s, n)| run(s, n)).collect()
}
