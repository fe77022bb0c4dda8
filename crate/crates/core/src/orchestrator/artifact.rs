use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::load::{read_requests_csv, write_requests_csv, LoadPlan, RequestRecord};
use crate::telemetry::{
    read_host_csv, read_power_csv, read_resources_csv, write_host_csv, write_power_csv, write_resources_csv,
    HostSample, PowerSample, ResourceSample, SimPowerModel,
};
use crate::workload::{ServiceMeta, WorkloadConfig};

pub const META_FILE: &str = "meta.json";
pub const FAILED_FILE: &str = "failed.json";
pub const MANIFEST_FILE: &str = "manifest.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HostInfo {
    pub cores: usize,
    pub hostname: Option<String>,
    pub kernel: Option<String>,
    pub governor: Option<String>,
}

impl HostInfo {
    pub fn detect(cores: usize) -> Self {
        let read = |p: &str| fs::read_to_string(p).ok().map(|s| s.trim().to_string()).filter(|s| !s.is_empty());
        Self {
            cores,
            hostname: read("/proc/sys/kernel/hostname"),
            kernel: read("/proc/sys/kernel/osrelease"),
            governor: read("/sys/devices/system/cpu/cpu0/cpufreq/scaling_governor"),
        }
    }
}

/// Everything needed to interpret one repetition without outside context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub repetition: usize,
    pub workload: WorkloadConfig,
    pub load: LoadPlan,
    pub warmup_s: f64,
    /// `real` or `sim`.
    pub backend: String,
    pub sim_model: Option<SimPowerModel>,
    pub power_scope: String,
    pub service: Option<ServiceMeta>,
    /// Reply to the single request sent before load starts.
    pub probe: Option<Value>,
    pub host: HostInfo,
    pub started_epoch_ms: i64,
    pub load_started_epoch_ms: i64,
    pub load_ended_epoch_ms: i64,
    pub ended_epoch_ms: i64,
    pub requests: usize,
    pub failures: usize,
    pub max_in_flight: usize,
    pub missed_ticks: u64,
}

impl RunMeta {
    /// `store_size` reported by the probe request, for endpoints that report one.
    pub fn probe_store_size(&self) -> Option<u64> {
        self.probe.as_ref()?.get("body_summary")?.get("store_size")?.as_u64()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureMark {
    pub repetition: usize,
    pub stage: String,
    pub cause: String,
}

/// One repetition's traces plus metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifact {
    pub dir: PathBuf,
    pub meta: RunMeta,
    pub requests: Vec<RequestRecord>,
    pub power: Vec<PowerSample>,
    pub resources: Vec<ResourceSample>,
    pub host: Vec<HostSample>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Runtime(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, what: &'static str) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse { what, path: path.to_path_buf(), detail: e.to_string() })
}

impl RunArtifact {
    pub fn write(&self) -> Result<()> {
        fs::create_dir_all(&self.dir).map_err(|e| Error::io(format!("creating {}", self.dir.display()), e))?;
        write_requests_csv(&self.dir.join("requests.csv"), &self.requests)?;
        write_power_csv(&self.dir.join("power.csv"), &self.power)?;
        write_resources_csv(&self.dir.join("resources.csv"), &self.resources)?;
        write_host_csv(&self.dir.join("host.csv"), &self.host)?;
        write_json(&self.dir.join(META_FILE), &self.meta)
    }

    /// Reads an artifact directory. `host.csv` is optional; the other three traces are not.
    pub fn load(dir: &Path) -> Result<Self> {
        if dir.join(FAILED_FILE).exists() {
            let mark: FailureMark = read_json(&dir.join(FAILED_FILE), "failure mark")?;
            return Err(Error::Trial { stage: mark.stage, cause: mark.cause });
        }
        let host_path = dir.join("host.csv");
        Ok(Self {
            dir: dir.to_path_buf(),
            meta: read_json(&dir.join(META_FILE), "run metadata")?,
            requests: read_requests_csv(&dir.join("requests.csv"))?,
            power: read_power_csv(&dir.join("power.csv"))?,
            resources: read_resources_csv(&dir.join("resources.csv"))?,
            host: if host_path.exists() { read_host_csv(&host_path)? } else { Vec::new() },
        })
    }

    /// Seconds of load according to the metadata.
    pub fn load_span_s(&self) -> f64 {
        (self.meta.load_ended_epoch_ms - self.meta.load_started_epoch_ms) as f64 / 1e3
    }

    /// Metadata duration and trace spans agree within `tolerance_s`.
    pub fn spans_consistent(&self, tolerance_s: f64) -> bool {
        let span = self.load_span_s();
        let trace = |ts: Vec<i64>| match (ts.first(), ts.last()) {
            (Some(a), Some(b)) => ((b - a + 1) as f64 - span).abs() <= tolerance_s,
            _ => false,
        };
        trace(self.resources.iter().map(|r| r.t_s).collect()) && trace(self.power.iter().map(|p| p.t_s).collect())
    }
}

pub fn write_failure(dir: &Path, mark: &FailureMark) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    write_json(&dir.join(FAILED_FILE), mark)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub repetition: usize,
    /// `ok` or `failed`.
    pub status: String,
    pub dir: String,
    pub detail: String,
}

impl ManifestEntry {
    pub fn ok(&self) -> bool {
        self.status == "ok"
    }
}

pub fn rep_dir_name(repetition: usize) -> String {
    format!("rep-{repetition}")
}

pub fn write_manifest(campaign_dir: &Path, entries: &[ManifestEntry]) -> Result<()> {
    crate::csvio::write_csv(&campaign_dir.join(MANIFEST_FILE), entries)
}

pub fn read_manifest(campaign_dir: &Path) -> Result<Vec<ManifestEntry>> {
    crate::csvio::read_csv(&campaign_dir.join(MANIFEST_FILE), "campaign manifest")
}

/// Successful artifacts of a campaign directory in repetition order, plus the manifest.
///
/// Without a manifest every `rep-*` subdirectory is tried.
pub fn load_campaign(campaign_dir: &Path) -> Result<(Vec<RunArtifact>, Vec<ManifestEntry>)> {
    let entries = if campaign_dir.join(MANIFEST_FILE).exists() {
        read_manifest(campaign_dir)?
    } else {
        let listing = fs::read_dir(campaign_dir)
            .map_err(|e| Error::io(format!("listing {}", campaign_dir.display()), e))?;
        let mut reps: Vec<usize> = listing
            .flatten()
            .filter_map(|e| e.file_name().to_str()?.strip_prefix("rep-")?.parse().ok())
            .collect();
        reps.sort_unstable();
        reps.into_iter()
            .map(|i| {
                let failed = campaign_dir.join(rep_dir_name(i)).join(FAILED_FILE).exists();
                ManifestEntry {
                    repetition: i,
                    status: if failed { "failed" } else { "ok" }.into(),
                    dir: rep_dir_name(i),
                    detail: String::new(),
                }
            })
            .collect()
    };
    let artifacts = entries
        .iter()
        .filter(|e| e.ok())
        .map(|e| RunArtifact::load(&campaign_dir.join(&e.dir)))
        .collect::<Result<Vec<_>>>()?;
    Ok((artifacts, entries))
}
