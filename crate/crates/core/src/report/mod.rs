//! Report bundle: one CSV per table, per-repetition timelines, and a Markdown rendering.
//!
//! Numbers are formatted once, when the CSVs are written; the Markdown is rendered
//! from those files so both always show the same digits.

mod render;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{CampaignAnalysis, Exclusions, PowerModel};
use crate::csvio::write_table;
use crate::error::{Error, Result};

pub use render::{render_report, write_report};

pub const REPORT_FILE: &str = "report.md";
pub const SUMMARY_FILE: &str = "summary.json";
pub const TABLE_FILES: [&str; 7] = [
    "descriptive.csv",
    "correlations.csv",
    "regression.csv",
    "energy.csv",
    "diagnostics.csv",
    "validity.csv",
    "per_run.csv",
];

/// Fixed-point with `dp` decimals; empty for absent or non-finite values, never `-0.000`.
pub fn fmt(v: Option<f64>, dp: usize) -> String {
    match v {
        Some(x) if x.is_finite() => {
            let s = format!("{x:.dp$}");
            if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
                s[1..].to_string()
            } else {
                s
            }
        }
        _ => String::new(),
    }
}

fn f(v: f64, dp: usize) -> String {
    fmt(Some(v), dp)
}

const BETA_DP: usize = 6;
const POWER_DP: usize = 2;
const ENERGY_DP: usize = 6;
const RT_DP: usize = 2;
const UTIL_DP: usize = 4;
const CORR_DP: usize = 4;
const P_DP: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleSummary {
    pub antipattern: String,
    pub backend: String,
    pub cpu_scope: String,
    pub warmup_s: f64,
    pub repetitions: Vec<usize>,
    pub pooled_rows: usize,
    pub excluded: Exclusions,
    pub model_errors: Vec<(String, String)>,
}

fn summary(a: &CampaignAnalysis) -> BundleSummary {
    BundleSummary {
        antipattern: a.antipattern.clone(),
        backend: a.backend.clone(),
        cpu_scope: match a.cpu_scope {
            crate::analysis::CpuScope::Process => "process".into(),
            crate::analysis::CpuScope::Host => "host".into(),
        },
        warmup_s: a.warmup_s,
        repetitions: a.repetitions.clone(),
        pooled_rows: a.pooled_rows,
        excluded: a.excluded,
        model_errors: a.regression_errors.iter().map(|(m, e)| (m.as_str().to_string(), e.clone())).collect(),
    }
}

fn metric<'a>(a: &'a CampaignAnalysis, name: &str) -> Option<&'a crate::analysis::MetricSummary> {
    a.descriptive.iter().find(|m| m.metric == name)
}

fn descriptive_rows(analyses: &[CampaignAnalysis]) -> Vec<Vec<String>> {
    analyses
        .iter()
        .map(|a| {
            let get = |name: &str, pick: fn(&crate::analysis::MetricSummary) -> f64, dp: usize| {
                fmt(metric(a, name).map(pick), dp)
            };
            vec![
                a.antipattern.clone(),
                a.pooled_rows.to_string(),
                get("rt_ms", |m| m.mean, RT_DP),
                get("rt_ms", |m| m.min, RT_DP),
                get("rt_ms", |m| m.max, RT_DP),
                get("cpu_power_w", |m| m.mean, POWER_DP),
                get("cpu_power_w", |m| m.min, POWER_DP),
                get("cpu_power_w", |m| m.max, POWER_DP),
                get("dram_power_w", |m| m.mean, POWER_DP),
                get("dram_power_w", |m| m.min, POWER_DP),
                get("dram_power_w", |m| m.max, POWER_DP),
                get("cpu_util", |m| m.mean, UTIL_DP),
                get("cpu_util", |m| m.max, UTIL_DP),
                get("req_rate", |m| m.mean, RT_DP),
            ]
        })
        .collect()
}

const DESCRIPTIVE_HEADER: [&str; 14] = [
    "antipattern",
    "rows",
    "rt_mean_ms",
    "rt_min_ms",
    "rt_max_ms",
    "cpu_power_mean_w",
    "cpu_power_min_w",
    "cpu_power_max_w",
    "dram_power_mean_w",
    "dram_power_min_w",
    "dram_power_max_w",
    "cpu_util_mean",
    "cpu_util_max",
    "req_rate_mean",
];

fn correlation_rows(analyses: &[CampaignAnalysis]) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    for a in analyses {
        let mut scopes: Vec<&str> = Vec::new();
        for c in &a.correlations {
            if !scopes.contains(&c.scope.as_str()) {
                scopes.push(&c.scope);
            }
        }
        for scope in scopes {
            let find = |target: &str| a.correlations.iter().find(|c| c.scope == scope && c.target == target);
            let mut row = vec![a.antipattern.clone(), scope.to_string()];
            for target in ["cpu_power_w", "dram_power_w"] {
                let c = find(target);
                row.push(c.map_or(String::new(), |c| c.n.to_string()));
                row.push(fmt(c.and_then(|c| c.pearson_r), CORR_DP));
                row.push(fmt(c.and_then(|c| c.spearman_rho), CORR_DP));
                row.push(c.and_then(|c| c.sign_agreement).map_or(String::new(), |b| b.to_string()));
            }
            out.push(row);
        }
    }
    out
}

const CORRELATION_HEADER: [&str; 10] = [
    "antipattern",
    "scope",
    "cpu_n",
    "cpu_pearson_r",
    "cpu_spearman_rho",
    "cpu_sign_agreement",
    "dram_n",
    "dram_pearson_r",
    "dram_spearman_rho",
    "dram_sign_agreement",
];

const REGRESSION_HEADER: [&str; 12] = [
    "antipattern",
    "model",
    "beta_lat",
    "ci_low",
    "ci_high",
    "p_lat",
    "decision",
    "se_hc3",
    "t_stat",
    "df",
    "n",
    "r_squared",
];

fn regression_rows(analyses: &[CampaignAnalysis]) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    for a in analyses {
        for model in [PowerModel::Cpu, PowerModel::Dram] {
            let Some(r) = a.regression(model) else { continue };
            out.push(vec![
                a.antipattern.clone(),
                model.as_str().into(),
                f(r.beta, BETA_DP),
                f(r.ci_low, BETA_DP),
                f(r.ci_high, BETA_DP),
                f(r.p_value, P_DP),
                r.decision.clone(),
                f(r.se_hc3, BETA_DP),
                f(r.t_stat, 3),
                r.df.to_string(),
                r.n.to_string(),
                f(r.r_squared, UTIL_DP),
            ]);
        }
    }
    out
}

const DIAGNOSTICS_HEADER: [&str; 6] = ["antipattern", "model", "test", "statistic", "p_value", "null_rejected"];

fn diagnostic_rows(analyses: &[CampaignAnalysis]) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    for a in analyses {
        for r in &a.regressions {
            for d in [&r.breusch_pagan, &r.anderson_darling].into_iter().flatten() {
                out.push(vec![
                    a.antipattern.clone(),
                    r.model.as_str().into(),
                    d.test.into(),
                    f(d.statistic, 4),
                    f(d.p_value, P_DP),
                    d.null_rejected.to_string(),
                ]);
            }
        }
    }
    out
}

const ENERGY_HEADER: [&str; 5] = ["antipattern", "scope", "duration_s", "cpu_kj", "dram_kj"];

fn energy_rows(analyses: &[CampaignAnalysis]) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    for a in analyses {
        let (cpu, dram) = a.mean_energy_kj();
        let mean_duration = a.energy.iter().map(|e| e.duration_s).sum::<f64>() / a.energy.len().max(1) as f64;
        out.push(vec![
            a.antipattern.clone(),
            "mean".into(),
            f(mean_duration, 1),
            fmt(cpu, ENERGY_DP),
            fmt(dram, ENERGY_DP),
        ]);
        for e in &a.energy {
            out.push(vec![
                a.antipattern.clone(),
                format!("rep-{}", e.repetition),
                f(e.duration_s, 1),
                fmt(e.cpu_kj, ENERGY_DP),
                fmt(e.dram_kj, ENERGY_DP),
            ]);
        }
    }
    out
}

const VALIDITY_HEADER: [&str; 9] = [
    "antipattern",
    "repetition",
    "requests",
    "failures",
    "zero_failures",
    "mean_cpu_util",
    "cpu_threshold",
    "cpu_floor",
    "valid",
];

fn validity_rows(analyses: &[CampaignAnalysis]) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    for a in analyses {
        for v in &a.validity {
            out.push(vec![
                a.antipattern.clone(),
                v.repetition.to_string(),
                v.requests.to_string(),
                v.failures.to_string(),
                v.zero_failures.to_string(),
                f(v.mean_cpu_util, UTIL_DP),
                f(v.cpu_threshold, UTIL_DP),
                v.cpu_floor.to_string(),
                v.valid().to_string(),
            ]);
        }
    }
    out
}

const PER_RUN_HEADER: [&str; 10] = [
    "antipattern",
    "repetition",
    "rows",
    "requests",
    "failures",
    "mean_cpu_power_w",
    "mean_dram_power_w",
    "mean_rt_ms",
    "mean_req_rate",
    "mean_cpu_util",
];

fn per_run_rows(analyses: &[CampaignAnalysis]) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    for a in analyses {
        for r in &a.per_run {
            out.push(vec![
                a.antipattern.clone(),
                r.repetition.to_string(),
                r.rows.to_string(),
                r.requests.to_string(),
                r.failures.to_string(),
                f(r.mean_cpu_power_w, POWER_DP),
                fmt(r.mean_dram_power_w, POWER_DP),
                f(r.mean_rt_ms, RT_DP),
                f(r.mean_req_rate, RT_DP),
                f(r.mean_cpu_util, UTIL_DP),
            ]);
        }
    }
    out
}

const TIMELINE_HEADER: [&str; 9] = [
    "t_s",
    "t_rel_s",
    "rt_ms",
    "req_rate",
    "failures",
    "cpu_util",
    "cpu_power_w",
    "dram_power_w",
    "memory_bytes",
];

fn write_timelines(a: &CampaignAnalysis, traces: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for (rep, rows) in &a.timelines {
        let dir = traces.join(format!("rep-{rep}"));
        fs::create_dir_all(&dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
        let body: Vec<Vec<String>> = rows
            .iter()
            .map(|r| {
                vec![
                    r.t_s.to_string(),
                    r.t_rel_s.to_string(),
                    fmt(r.rt_ms, 3),
                    r.req_rate.to_string(),
                    r.failures.to_string(),
                    fmt(r.cpu_util, UTIL_DP),
                    fmt(r.cpu_power_w, POWER_DP),
                    fmt(r.dram_power_w, POWER_DP),
                    r.memory_bytes.map_or(String::new(), |m| m.to_string()),
                ]
            })
            .collect();
        let path = dir.join("timeline.csv");
        write_table(&path, &TIMELINE_HEADER, &body)?;
        written.push(path);
    }
    Ok(written)
}

/// Writes every table of one or more campaign analyses into `dir` and renders `report.md`.
///
/// With a single analysis timelines go to `traces/rep-<i>/`, otherwise to
/// `traces/<antipattern>/rep-<i>/`.
pub fn write_bundle(analyses: &[CampaignAnalysis], dir: &Path) -> Result<PathBuf> {
    if analyses.is_empty() {
        return Err(Error::Runtime("nothing to report".into()));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    write_table(&dir.join("descriptive.csv"), &DESCRIPTIVE_HEADER, &descriptive_rows(analyses))?;
    write_table(&dir.join("correlations.csv"), &CORRELATION_HEADER, &correlation_rows(analyses))?;
    write_table(&dir.join("regression.csv"), &REGRESSION_HEADER, &regression_rows(analyses))?;
    write_table(&dir.join("energy.csv"), &ENERGY_HEADER, &energy_rows(analyses))?;
    write_table(&dir.join("diagnostics.csv"), &DIAGNOSTICS_HEADER, &diagnostic_rows(analyses))?;
    write_table(&dir.join("validity.csv"), &VALIDITY_HEADER, &validity_rows(analyses))?;
    write_table(&dir.join("per_run.csv"), &PER_RUN_HEADER, &per_run_rows(analyses))?;

    let traces = dir.join("traces");
    if traces.exists() {
        fs::remove_dir_all(&traces).map_err(|e| Error::io(format!("clearing {}", traces.display()), e))?;
    }
    for a in analyses {
        let base = if analyses.len() == 1 { traces.clone() } else { traces.join(&a.antipattern) };
        write_timelines(a, &base)?;
    }

    let summaries: Vec<BundleSummary> = analyses.iter().map(summary).collect();
    let json = serde_json::to_string_pretty(&summaries).map_err(|e| Error::Runtime(e.to_string()))? + "\n";
    fs::write(dir.join(SUMMARY_FILE), json).map_err(|e| Error::io("writing the bundle summary", e))?;
    write_report(dir)
}
