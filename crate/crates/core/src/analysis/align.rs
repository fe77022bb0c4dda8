use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::load::bin_requests;
use crate::orchestrator::{RunArtifact, TrimmedView};

/// Which CPU utilisation (and, when recorded, package power) enters the models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CpuScope {
    /// The service process; power is package power times its CPU share.
    #[default]
    Process,
    /// The whole host.
    Host,
}

impl std::str::FromStr for CpuScope {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "process" => Ok(CpuScope::Process),
            "host" => Ok(CpuScope::Host),
            other => Err(Error::Usage(format!("unknown CPU scope `{other}` (expected process or host)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignedRow {
    pub repetition: usize,
    pub t_s: i64,
    pub cpu_power_w: f64,
    pub dram_power_w: Option<f64>,
    /// Mean over requests that completed successfully in this second.
    pub rt_ms: f64,
    /// Completions in this second.
    pub req_rate: f64,
    pub cpu_util: f64,
    pub memory_bytes: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusions {
    pub negative_power: usize,
    pub missing_power: usize,
    pub missing_rt: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AlignedTable {
    pub rows: Vec<AlignedRow>,
    pub excluded: Exclusions,
}

impl AlignedTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn extend(&mut self, other: AlignedTable) {
        self.rows.extend(other.rows);
        self.excluded.negative_power += other.excluded.negative_power;
        self.excluded.missing_power += other.excluded.missing_power;
        self.excluded.missing_rt += other.excluded.missing_rt;
    }

    pub fn column(&self, f: impl Fn(&AlignedRow) -> f64) -> Vec<f64> {
        self.rows.iter().map(f).collect()
    }
}

/// Per-second join on the resource timeline. A second is kept only when it has a
/// non-negative power reading and at least one successful completion.
pub fn align(view: &TrimmedView, scope: CpuScope) -> Result<AlignedTable> {
    let power: BTreeMap<i64, _> = view.power.iter().map(|p| (p.t_s, p)).collect();
    let host: BTreeMap<i64, _> = view.host.iter().map(|h| (h.t_s, h)).collect();
    let bins: BTreeMap<i64, _> = bin_requests(&view.requests, 1).into_iter().map(|b| (b.t_s, b)).collect();
    if scope == CpuScope::Host && host.is_empty() {
        return Err(Error::Usage(format!(
            "repetition {} has no host samples; host CPU scope is unavailable",
            view.repetition
        )));
    }

    let mut table = AlignedTable::default();
    for r in &view.resources {
        let (cpu_util, host_power) = match scope {
            CpuScope::Process => (r.cpu_util, None),
            CpuScope::Host => match host.get(&r.t_s) {
                Some(h) => (h.host_cpu_util, h.package_power_w),
                None => {
                    table.excluded.missing_power += 1;
                    continue;
                }
            },
        };
        let Some(p) = power.get(&r.t_s) else {
            table.excluded.missing_power += 1;
            continue;
        };
        let cpu_power_w = host_power.unwrap_or(p.cpu_power_w);
        let negative = |v: f64| !(v >= 0.0);
        if negative(cpu_power_w) || p.dram_power_w.is_some_and(negative) {
            table.excluded.negative_power += 1;
            continue;
        }
        let Some((bin, rt)) = bins.get(&r.t_s).and_then(|b| Some((b, b.mean_rt_ms?))) else {
            table.excluded.missing_rt += 1;
            continue;
        };
        table.rows.push(AlignedRow {
            repetition: view.repetition,
            t_s: r.t_s,
            cpu_power_w,
            dram_power_w: p.dram_power_w,
            rt_ms: rt,
            req_rate: bin.completions as f64,
            cpu_util,
            memory_bytes: r.memory_bytes.map(|m| m as f64),
        });
    }
    if table.is_empty() {
        return Err(Error::Runtime(format!(
            "repetition {}: no second has both a power reading and a completed request after trimming",
            view.repetition
        )));
    }
    Ok(table)
}

/// Per-second plot data over the whole untrimmed run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimelineRow {
    pub t_s: i64,
    /// Seconds since load start.
    pub t_rel_s: i64,
    pub rt_ms: Option<f64>,
    pub req_rate: u64,
    pub failures: u64,
    pub cpu_util: Option<f64>,
    pub cpu_power_w: Option<f64>,
    pub dram_power_w: Option<f64>,
    pub memory_bytes: Option<u64>,
}

pub fn timeline(artifact: &RunArtifact) -> Vec<TimelineRow> {
    let mut rows: BTreeMap<i64, TimelineRow> = BTreeMap::new();
    let origin = artifact.meta.load_started_epoch_ms.div_euclid(1000);
    let blank = |t_s: i64| TimelineRow {
        t_s,
        t_rel_s: t_s - origin,
        rt_ms: None,
        req_rate: 0,
        failures: 0,
        cpu_util: None,
        cpu_power_w: None,
        dram_power_w: None,
        memory_bytes: None,
    };
    for b in bin_requests(&artifact.requests, 1) {
        let row = rows.entry(b.t_s).or_insert_with(|| blank(b.t_s));
        row.rt_ms = b.mean_rt_ms;
        row.req_rate = b.completions;
        row.failures = b.failures;
    }
    for r in &artifact.resources {
        let row = rows.entry(r.t_s).or_insert_with(|| blank(r.t_s));
        row.cpu_util = Some(r.cpu_util);
        row.memory_bytes = r.memory_bytes;
    }
    for p in &artifact.power {
        let row = rows.entry(p.t_s).or_insert_with(|| blank(p.t_s));
        row.cpu_power_w = Some(p.cpu_power_w);
        row.dram_power_w = p.dram_power_w;
    }
    rows.into_values().collect()
}
