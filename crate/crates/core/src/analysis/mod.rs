//! Campaign analysis: trim, align, pool, then the statistics of the report tables.

mod align;

use apbench_stats::{
    anderson_darling, breusch_pagan, correlate, descriptive, hc3_covariance, infer_coefficient, ols_fit,
    trapezoid_energy, Design, StatsError, ALPHA,
};
use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::error::{Error, Result};
use crate::orchestrator::{trim_warmup, validity_check, RunArtifact, ValidityReport};

pub use align::{align, timeline, AlignedRow, AlignedTable, CpuScope, Exclusions, TimelineRow};

/// Index of the response-time coefficient in both designs.
pub const RT_INDEX: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerModel {
    Cpu,
    Dram,
}

impl PowerModel {
    pub fn as_str(self) -> &'static str {
        match self {
            PowerModel::Cpu => "cpu",
            PowerModel::Dram => "dram",
        }
    }

    pub fn target(self) -> &'static str {
        match self {
            PowerModel::Cpu => "cpu_power_w",
            PowerModel::Dram => "dram_power_w",
        }
    }
}

/// Builds y and X for one model. Column order is fixed: intercept, rt_ms, req_rate,
/// cpu_util, and for DRAM also memory_bytes. Rows lacking a needed value are skipped.
pub fn assemble_design(table: &AlignedTable, model: PowerModel) -> Result<(Design, Vec<f64>)> {
    let rows: Vec<&AlignedRow> = table
        .rows
        .iter()
        .filter(|r| model == PowerModel::Cpu || (r.dram_power_w.is_some() && r.memory_bytes.is_some()))
        .collect();
    if rows.is_empty() {
        return Err(Error::Runtime(format!("no rows carry the inputs of the {} model", model.as_str())));
    }
    let col = |f: fn(&AlignedRow) -> f64| rows.iter().map(|r| f(r)).collect::<Vec<f64>>();
    let rt = col(|r| r.rt_ms);
    let rate = col(|r| r.req_rate);
    let util = col(|r| r.cpu_util);
    let (design, y) = match model {
        PowerModel::Cpu => (
            Design::with_intercept(vec!["rt_ms", "req_rate", "cpu_util"], &[&rt, &rate, &util])?,
            col(|r| r.cpu_power_w),
        ),
        PowerModel::Dram => {
            let mem = col(|r| r.memory_bytes.unwrap_or(0.0));
            (
                Design::with_intercept(vec!["rt_ms", "req_rate", "cpu_util", "memory_bytes"], &[&rt, &rate, &util, &mem])?,
                col(|r| r.dram_power_w.unwrap_or(0.0)),
            )
        }
    };
    let constant = design.constant_columns();
    if !constant.is_empty() {
        warn!(model = model.as_str(), columns = ?constant, "constant predictor; the fit will be singular");
    }
    Ok((design, y))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricSummary {
    pub metric: &'static str,
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationRow {
    /// `pooled` or `rep-<i>`.
    pub scope: String,
    pub target: &'static str,
    pub n: usize,
    /// `None` when a series has no variance.
    pub pearson_r: Option<f64>,
    pub spearman_rho: Option<f64>,
    pub sign_agreement: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionRow {
    pub model: PowerModel,
    pub n: usize,
    pub p: usize,
    pub r_squared: f64,
    pub beta: f64,
    pub se_hc3: f64,
    pub t_stat: f64,
    pub df: usize,
    pub ci_low: f64,
    pub ci_high: f64,
    pub p_value: f64,
    /// reject_up, reject_down or keep.
    pub decision: String,
    pub breusch_pagan: Option<DiagnosticRow>,
    pub anderson_darling: Option<DiagnosticRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticRow {
    pub test: &'static str,
    pub statistic: f64,
    pub p_value: f64,
    pub null_rejected: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunEnergy {
    pub repetition: usize,
    pub duration_s: f64,
    pub cpu_kj: Option<f64>,
    pub dram_kj: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerRunRow {
    pub repetition: usize,
    pub rows: usize,
    pub requests: usize,
    pub failures: usize,
    pub mean_cpu_power_w: f64,
    pub mean_dram_power_w: Option<f64>,
    pub mean_rt_ms: f64,
    pub mean_req_rate: f64,
    pub mean_cpu_util: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisOptions {
    /// Overrides the warm-up recorded in each artifact.
    pub warmup_s: Option<f64>,
    pub cpu_scope: CpuScope,
    /// Pool only repetitions passing the validity rules.
    pub valid_only: bool,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self { warmup_s: None, cpu_scope: CpuScope::Process, valid_only: false }
    }
}

/// Everything the report tables are made from.
#[derive(Debug, Clone, PartialEq)]
pub struct CampaignAnalysis {
    pub antipattern: String,
    pub backend: String,
    pub cpu_scope: CpuScope,
    pub warmup_s: f64,
    pub repetitions: Vec<usize>,
    pub pooled_rows: usize,
    pub excluded: Exclusions,
    pub descriptive: Vec<MetricSummary>,
    pub correlations: Vec<CorrelationRow>,
    pub regressions: Vec<RegressionRow>,
    /// Failed model fits, by model, with the reason.
    pub regression_errors: Vec<(PowerModel, String)>,
    pub energy: Vec<RunEnergy>,
    pub validity: Vec<ValidityReport>,
    pub per_run: Vec<PerRunRow>,
    pub timelines: Vec<(usize, Vec<TimelineRow>)>,
}

impl CampaignAnalysis {
    pub fn regression(&self, model: PowerModel) -> Option<&RegressionRow> {
        self.regressions.iter().find(|r| r.model == model)
    }

    pub fn mean_energy_kj(&self) -> (Option<f64>, Option<f64>) {
        let mean = |v: Vec<Option<f64>>| -> Option<f64> {
            let v: Option<Vec<f64>> = v.into_iter().collect();
            v.filter(|v| !v.is_empty()).map(|v| v.iter().sum::<f64>() / v.len() as f64)
        };
        (
            mean(self.energy.iter().map(|e| e.cpu_kj).collect()),
            mean(self.energy.iter().map(|e| e.dram_kj).collect()),
        )
    }
}

fn correlation_row(scope: String, target: &'static str, x: &[f64], y: &[f64]) -> CorrelationRow {
    match correlate(x, y) {
        Ok(c) => CorrelationRow {
            scope,
            target,
            n: x.len(),
            pearson_r: Some(c.pearson_r),
            spearman_rho: Some(c.spearman_rho),
            sign_agreement: Some(c.sign_agreement),
        },
        Err(_) => CorrelationRow { scope, target, n: x.len(), pearson_r: None, spearman_rho: None, sign_agreement: None },
    }
}

fn correlations(scope: &str, table: &AlignedTable) -> Vec<CorrelationRow> {
    let rt = table.column(|r| r.rt_ms);
    let cpu = table.column(|r| r.cpu_power_w);
    let dram_pairs: Vec<(f64, f64)> =
        table.rows.iter().filter_map(|r| Some((r.rt_ms, r.dram_power_w?))).collect();
    let mut out = vec![correlation_row(scope.into(), "cpu_power_w", &rt, &cpu)];
    if !dram_pairs.is_empty() {
        let (x, y): (Vec<f64>, Vec<f64>) = dram_pairs.into_iter().unzip();
        out.push(correlation_row(scope.into(), "dram_power_w", &x, &y));
    }
    out
}

fn diag_row(d: apbench_stats::DiagnosticResult) -> DiagnosticRow {
    DiagnosticRow { test: d.test.as_str(), statistic: d.statistic, p_value: d.p_value, null_rejected: d.null_rejected }
}

/// OLS with HC3 inference on the response-time coefficient plus both residual diagnostics.
pub fn fit_model(table: &AlignedTable, model: PowerModel) -> Result<RegressionRow> {
    let (design, y) = assemble_design(table, model)?;
    let fit = ols_fit(&design, &y)?;
    let cov = hc3_covariance(&fit, &design)?;
    let inf = infer_coefficient(&fit, &cov, RT_INDEX, ALPHA)?;
    let bp = breusch_pagan(&fit, &design).map(diag_row);
    let ad = anderson_darling(&fit.residuals).map(diag_row);
    for (name, r) in [("Breusch-Pagan", &bp), ("Anderson-Darling", &ad)] {
        if let Err(e) = r {
            warn!(model = model.as_str(), test = name, error = %e, "diagnostic unavailable");
        }
    }
    Ok(RegressionRow {
        model,
        n: fit.n,
        p: fit.p,
        r_squared: fit.r_squared,
        beta: inf.beta,
        se_hc3: inf.se,
        t_stat: inf.t_stat,
        df: inf.df,
        ci_low: inf.ci_low,
        ci_high: inf.ci_high,
        p_value: inf.p_value,
        decision: inf.decision.as_str().into(),
        breusch_pagan: bp.ok(),
        anderson_darling: ad.ok(),
    })
}

fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

fn run_energy(a: &RunArtifact) -> RunEnergy {
    let kj = |series: Option<Vec<(f64, f64)>>| -> Option<f64> {
        let series = series?;
        if series.len() < 2 {
            return None;
        }
        trapezoid_energy(&series).ok().map(|j| j / 1e3)
    };
    let cpu: Vec<(f64, f64)> = a.power.iter().map(|p| (p.t_s as f64, p.cpu_power_w)).collect();
    let dram: Option<Vec<(f64, f64)>> = a.power.iter().map(|p| Some((p.t_s as f64, p.dram_power_w?))).collect();
    let duration_s = match (a.power.first(), a.power.last()) {
        (Some(f), Some(l)) => (l.t_s - f.t_s) as f64,
        _ => 0.0,
    };
    RunEnergy { repetition: a.meta.repetition, duration_s, cpu_kj: kj(Some(cpu)), dram_kj: kj(dram) }
}

fn stats_err(e: StatsError) -> Error {
    Error::Stats(e)
}

/// Pools the aligned post-warm-up rows of every artifact and computes all report tables.
pub fn analyze_campaign(artifacts: &[RunArtifact], opts: &AnalysisOptions) -> Result<CampaignAnalysis> {
    let first = artifacts.first().ok_or_else(|| Error::Runtime("no successful repetitions to analyse".into()))?;
    let mut pooled = AlignedTable::default();
    let mut validity = Vec::new();
    let mut per_run = Vec::new();
    let mut per_run_corr = Vec::new();
    let mut used = Vec::new();
    let mut warmup_used = opts.warmup_s.unwrap_or(first.meta.warmup_s);

    for a in artifacts {
        let warmup = opts.warmup_s.unwrap_or(a.meta.warmup_s);
        warmup_used = warmup;
        let view = trim_warmup(a, warmup)?;
        let report = validity_check(&view);
        let valid = report.valid();
        validity.push(report);
        if opts.valid_only && !valid {
            continue;
        }
        let table = match align(&view, opts.cpu_scope) {
            Ok(t) => t,
            Err(e) => {
                warn!(repetition = a.meta.repetition, error = %e, "repetition contributes no rows");
                continue;
            }
        };
        per_run.push(PerRunRow {
            repetition: a.meta.repetition,
            rows: table.len(),
            requests: view.requests.len(),
            failures: view.requests.iter().filter(|r| !r.success).count(),
            mean_cpu_power_w: mean(table.rows.iter().map(|r| r.cpu_power_w)).unwrap_or(f64::NAN),
            mean_dram_power_w: mean(table.rows.iter().filter_map(|r| r.dram_power_w)),
            mean_rt_ms: mean(table.rows.iter().map(|r| r.rt_ms)).unwrap_or(f64::NAN),
            mean_req_rate: mean(table.rows.iter().map(|r| r.req_rate)).unwrap_or(f64::NAN),
            mean_cpu_util: mean(table.rows.iter().map(|r| r.cpu_util)).unwrap_or(f64::NAN),
        });
        per_run_corr.extend(correlations(&format!("rep-{}", a.meta.repetition), &table));
        used.push(a.meta.repetition);
        pooled.extend(table);
    }
    if pooled.is_empty() {
        return Err(Error::Runtime("no valid repetition left any rows to analyse".into()));
    }

    let mut descriptive_rows = Vec::new();
    let metrics: [(&'static str, Vec<f64>); 6] = [
        ("cpu_power_w", pooled.column(|r| r.cpu_power_w)),
        ("dram_power_w", pooled.rows.iter().filter_map(|r| r.dram_power_w).collect()),
        ("rt_ms", pooled.column(|r| r.rt_ms)),
        ("req_rate", pooled.column(|r| r.req_rate)),
        ("cpu_util", pooled.column(|r| r.cpu_util)),
        ("memory_bytes", pooled.rows.iter().filter_map(|r| r.memory_bytes).collect()),
    ];
    for (metric, series) in metrics {
        if series.is_empty() {
            continue;
        }
        let d = descriptive(&series).map_err(stats_err)?;
        descriptive_rows.push(MetricSummary { metric, count: d.count, mean: d.mean, min: d.min, max: d.max });
    }

    let mut corr = correlations("pooled", &pooled);
    corr.extend(per_run_corr);

    let mut regressions = Vec::new();
    let mut regression_errors = Vec::new();
    for model in [PowerModel::Cpu, PowerModel::Dram] {
        if model == PowerModel::Dram && pooled.rows.iter().all(|r| r.dram_power_w.is_none()) {
            regression_errors.push((model, "no DRAM power recorded".to_string()));
            continue;
        }
        match fit_model(&pooled, model) {
            Ok(r) => regressions.push(r),
            Err(e) => {
                warn!(model = model.as_str(), error = %e, "model fit failed");
                regression_errors.push((model, e.to_string()));
            }
        }
    }

    Ok(CampaignAnalysis {
        antipattern: first.meta.workload.kind.slug().to_string(),
        backend: first.meta.backend.clone(),
        cpu_scope: opts.cpu_scope,
        warmup_s: warmup_used,
        repetitions: used,
        pooled_rows: pooled.len(),
        excluded: pooled.excluded,
        descriptive: descriptive_rows,
        correlations: corr,
        regressions,
        regression_errors,
        energy: artifacts.iter().map(run_energy).collect(),
        validity,
        per_run,
        timelines: artifacts.iter().map(|a| (a.meta.repetition, timeline(a))).collect(),
    })
}
