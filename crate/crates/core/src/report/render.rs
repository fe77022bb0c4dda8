use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use apbench_stats::Decision;

use super::{BundleSummary, REPORT_FILE, SUMMARY_FILE};
use crate::csvio::read_table;
use crate::error::{Error, Result};
use crate::workload::AntipatternKind;

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn load(dir: &Path, name: &str) -> Result<Option<Self>> {
        let path = dir.join(name);
        if !path.exists() {
            return Ok(None);
        }
        let (header, rows) = read_table(&path)?;
        Ok(Some(Self { header, rows }))
    }

    fn col(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    fn get<'a>(&self, row: &'a [String], name: &str) -> &'a str {
        self.col(name).and_then(|i| row.get(i)).map_or("", String::as_str)
    }
}

fn display_name(slug: &str) -> String {
    slug.parse::<AntipatternKind>().map_or_else(|_| slug.to_string(), |k| k.name().to_string())
}

fn or_dash(s: &str) -> &str {
    if s.is_empty() {
        "n/a"
    } else {
        s
    }
}

fn md_table(out: &mut String, header: &[&str], rows: &[Vec<String>]) {
    let _ = writeln!(out, "| {} |", header.join(" | "));
    let _ = writeln!(out, "|{}|", header.iter().map(|_| "---").collect::<Vec<_>>().join("|"));
    for r in rows {
        let cells: Vec<&str> = r.iter().map(|c| or_dash(c)).collect();
        let _ = writeln!(out, "| {} |", cells.join(" | "));
    }
    out.push('\n');
}

fn missing(out: &mut String, file: &str) {
    let _ = writeln!(out, "_{file} is missing from the bundle._\n");
}

fn decision_label(s: &str) -> String {
    Decision::parse(s).map_or_else(|| s.to_string(), |d| d.label().to_string())
}

fn timeline_files(dir: &Path) -> Vec<PathBuf> {
    let mut found = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        let Ok(entries) = fs::read_dir(&d) else { continue };
        for e in entries.flatten() {
            let p = e.path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().is_some_and(|n| n == "timeline.csv") {
                found.push(p);
            }
        }
    }
    found.sort();
    found
}

/// Markdown for the bundle in `dir`, built only from the files in it.
pub fn render_report(dir: &Path) -> Result<String> {
    let mut out = String::from("# Antipattern power report\n\n");

    let summaries: Vec<BundleSummary> = match fs::read_to_string(dir.join(SUMMARY_FILE)) {
        Ok(text) => serde_json::from_str(&text).map_err(|e| Error::Parse {
            what: "bundle summary",
            path: dir.join(SUMMARY_FILE),
            detail: e.to_string(),
        })?,
        Err(_) => Vec::new(),
    };
    if !summaries.is_empty() {
        let rows: Vec<Vec<String>> = summaries
            .iter()
            .map(|s| {
                vec![
                    display_name(&s.antipattern),
                    s.backend.clone(),
                    s.cpu_scope.clone(),
                    format!("{}", s.warmup_s),
                    s.repetitions.len().to_string(),
                    s.pooled_rows.to_string(),
                    format!(
                        "{} negative power, {} no power, {} no completions",
                        s.excluded.negative_power, s.excluded.missing_power, s.excluded.missing_rt
                    ),
                ]
            })
            .collect();
        md_table(
            &mut out,
            &["Experiment", "Backend", "CPU scope", "Warm-up (s)", "Repetitions", "Rows", "Excluded seconds"],
            &rows,
        );
        for s in &summaries {
            for (model, err) in &s.model_errors {
                let _ = writeln!(out, "- {}: {model} model not fitted: {err}", display_name(&s.antipattern));
            }
        }
        if summaries.iter().any(|s| !s.model_errors.is_empty()) {
            out.push('\n');
        }
    }

    out.push_str("## Power and response time\n\n");
    match Table::load(dir, "descriptive.csv")? {
        Some(t) => {
            let cols = [
                "rt_mean_ms",
                "rt_max_ms",
                "cpu_power_mean_w",
                "cpu_power_max_w",
                "dram_power_mean_w",
                "dram_power_min_w",
                "dram_power_max_w",
            ];
            let rows: Vec<Vec<String>> = t
                .rows
                .iter()
                .map(|r| {
                    std::iter::once(display_name(t.get(r, "antipattern")))
                        .chain(cols.iter().map(|c| t.get(r, c).to_string()))
                        .collect()
                })
                .collect();
            md_table(
                &mut out,
                &[
                    "Experiment",
                    "RT mean (ms)",
                    "RT max (ms)",
                    "CPU mean (W)",
                    "CPU max (W)",
                    "DRAM mean (W)",
                    "DRAM min (W)",
                    "DRAM max (W)",
                ],
                &rows,
            );
        }
        None => missing(&mut out, "descriptive.csv"),
    }

    out.push_str("## Correlation with response time\n\nPooled rows; `*` marks Pearson and Spearman sharing a sign.\n\n");
    match Table::load(dir, "correlations.csv")? {
        Some(t) => {
            let mark = |r: &[String], v: &str, flag: &str| {
                let v = t.get(r, v).to_string();
                if t.get(r, flag) == "true" {
                    format!("{v}*")
                } else {
                    v
                }
            };
            let rows: Vec<Vec<String>> = t
                .rows
                .iter()
                .filter(|r| t.get(r, "scope") == "pooled")
                .map(|r| {
                    vec![
                        display_name(t.get(r, "antipattern")),
                        mark(r, "cpu_pearson_r", "cpu_sign_agreement"),
                        mark(r, "cpu_spearman_rho", "cpu_sign_agreement"),
                        mark(r, "dram_pearson_r", "dram_sign_agreement"),
                        mark(r, "dram_spearman_rho", "dram_sign_agreement"),
                    ]
                })
                .collect();
            md_table(&mut out, &["Experiment", "CPU Pearson r", "CPU Spearman ρ", "DRAM Pearson r", "DRAM Spearman ρ"], &rows);
        }
        None => missing(&mut out, "correlations.csv"),
    }

    out.push_str("## Power vs response time\n\nResponse-time coefficient with HC3 95% interval.\n\n");
    match Table::load(dir, "regression.csv")? {
        Some(t) => {
            let mut experiments: Vec<&str> = Vec::new();
            for r in &t.rows {
                let a = t.get(r, "antipattern");
                if !experiments.contains(&a) {
                    experiments.push(a);
                }
            }
            let rows: Vec<Vec<String>> = experiments
                .iter()
                .map(|a| {
                    let mut row = vec![display_name(a)];
                    for model in ["cpu", "dram"] {
                        match t.rows.iter().find(|r| t.get(r, "antipattern") == *a && t.get(r, "model") == model) {
                            Some(r) => {
                                for c in ["beta_lat", "ci_low", "ci_high", "p_lat"] {
                                    row.push(t.get(r, c).to_string());
                                }
                                row.push(decision_label(t.get(r, "decision")));
                            }
                            None => row.extend(std::iter::repeat_n(String::new(), 5)),
                        }
                    }
                    row
                })
                .collect();
            md_table(
                &mut out,
                &[
                    "Experiment",
                    "CPU β_lat",
                    "CI low",
                    "CI high",
                    "p_lat",
                    "Decision",
                    "DRAM β_lat",
                    "CI low",
                    "CI high",
                    "p_lat",
                    "Decision",
                ],
                &rows,
            );
        }
        None => missing(&mut out, "regression.csv"),
    }

    out.push_str("## Energy\n\nMean over repetitions, trapezoidal rule over the full power trace.\n\n");
    match Table::load(dir, "energy.csv")? {
        Some(t) => {
            let rows: Vec<Vec<String>> = t
                .rows
                .iter()
                .filter(|r| t.get(r, "scope") == "mean")
                .map(|r| {
                    vec![display_name(t.get(r, "antipattern")), t.get(r, "cpu_kj").into(), t.get(r, "dram_kj").into()]
                })
                .collect();
            md_table(&mut out, &["Experiment", "CPU (kJ)", "DRAM (kJ)"], &rows);
        }
        None => missing(&mut out, "energy.csv"),
    }

    out.push_str("## Residual diagnostics\n\n");
    match Table::load(dir, "diagnostics.csv")? {
        Some(t) => {
            let rows: Vec<Vec<String>> = t
                .rows
                .iter()
                .map(|r| {
                    vec![
                        display_name(t.get(r, "antipattern")),
                        t.get(r, "model").into(),
                        t.get(r, "test").into(),
                        t.get(r, "statistic").into(),
                        t.get(r, "p_value").into(),
                        t.get(r, "null_rejected").into(),
                    ]
                })
                .collect();
            md_table(&mut out, &["Experiment", "Model", "Test", "Statistic", "p", "Null rejected"], &rows);
        }
        None => missing(&mut out, "diagnostics.csv"),
    }

    out.push_str("## Validity\n\n");
    match Table::load(dir, "validity.csv")? {
        Some(t) => {
            let rows: Vec<Vec<String>> = t
                .rows
                .iter()
                .map(|r| {
                    std::iter::once(display_name(t.get(r, "antipattern")))
                        .chain(
                            ["repetition", "requests", "failures", "zero_failures", "mean_cpu_util", "cpu_threshold", "cpu_floor"]
                                .iter()
                                .map(|c| t.get(r, c).to_string()),
                        )
                        .collect()
                })
                .collect();
            md_table(
                &mut out,
                &["Experiment", "Rep", "Requests", "Failures", "zero_failures", "Mean CPU util", "Threshold", "cpu_floor"],
                &rows,
            );
        }
        None => missing(&mut out, "validity.csv"),
    }

    out.push_str("## Timelines\n\n");
    let files = timeline_files(&dir.join("traces"));
    if files.is_empty() {
        out.push_str("No timeline data found under traces/.\n");
    } else {
        for p in files {
            let rel = p.strip_prefix(dir).unwrap_or(&p);
            let _ = writeln!(out, "- `{}`", rel.display());
        }
    }
    Ok(out)
}

/// Renders the bundle in `dir` and writes `report.md` next to it.
pub fn write_report(dir: &Path) -> Result<PathBuf> {
    let text = render_report(dir)?;
    let path = dir.join(REPORT_FILE);
    fs::write(&path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
    Ok(path)
}
