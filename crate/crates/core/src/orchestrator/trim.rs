use serde::{Deserialize, Serialize};

use super::artifact::RunArtifact;
use crate::error::{Error, Result};
use crate::load::RequestRecord;
use crate::telemetry::{HostSample, PowerSample, ResourceSample};

/// The analysis window of one artifact: everything from load start + warm-up on.
#[derive(Debug, Clone, PartialEq)]
pub struct TrimmedView {
    pub repetition: usize,
    /// First second kept, epoch seconds.
    pub cutoff_s: i64,
    pub window_s: f64,
    pub requests: Vec<RequestRecord>,
    pub power: Vec<PowerSample>,
    pub resources: Vec<ResourceSample>,
    pub host: Vec<HostSample>,
    pub cores: usize,
}

/// Drops every sample labelled before load start + `warmup_s` and every request
/// completing before it. The artifact itself is not modified.
pub fn trim_warmup(artifact: &RunArtifact, warmup_s: f64) -> Result<TrimmedView> {
    let span = artifact.load_span_s();
    if !(warmup_s >= 0.0) {
        return Err(Error::Usage(format!("warm-up must be non-negative, got {warmup_s}")));
    }
    if warmup_s >= span {
        return Err(Error::Usage(format!(
            "warm-up of {warmup_s} s leaves nothing of a {span:.1} s trace in {}",
            artifact.dir.display()
        )));
    }
    let cutoff_ms = artifact.meta.load_started_epoch_ms as f64 + warmup_s * 1e3;
    let cutoff_s = (cutoff_ms / 1e3).ceil() as i64;
    Ok(TrimmedView {
        repetition: artifact.meta.repetition,
        cutoff_s,
        window_s: span - warmup_s,
        requests: artifact.requests.iter().filter(|r| r.completion_ms() >= cutoff_ms).copied().collect(),
        power: artifact.power.iter().filter(|p| p.t_s >= cutoff_s).copied().collect(),
        resources: artifact.resources.iter().filter(|r| r.t_s >= cutoff_s).copied().collect(),
        host: artifact.host.iter().filter(|h| h.t_s >= cutoff_s).copied().collect(),
        cores: artifact.meta.host.cores,
    })
}

/// Mean utilisation a valid run must reach, as a fraction of one core.
pub const CPU_FLOOR_PER_CORE: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub repetition: usize,
    pub requests: usize,
    pub failures: usize,
    pub zero_failures: bool,
    pub mean_cpu_util: f64,
    /// 0.3 of one core expressed against total capacity: 0.075 on four cores.
    pub cpu_threshold: f64,
    pub cpu_floor: bool,
}

impl ValidityReport {
    pub fn valid(&self) -> bool {
        self.zero_failures && self.cpu_floor
    }
}

pub fn cpu_floor_threshold(cores: usize) -> f64 {
    CPU_FLOOR_PER_CORE / cores.max(1) as f64
}

/// Zero failed requests, and mean process CPU utilisation over the window at or above the floor.
pub fn validity_check(view: &TrimmedView) -> ValidityReport {
    let failures = view.requests.iter().filter(|r| !r.success).count();
    let mean_cpu_util = if view.resources.is_empty() {
        0.0
    } else {
        view.resources.iter().map(|r| r.cpu_util).sum::<f64>() / view.resources.len() as f64
    };
    let cpu_threshold = cpu_floor_threshold(view.cores);
    ValidityReport {
        repetition: view.repetition,
        requests: view.requests.len(),
        failures,
        zero_failures: failures == 0,
        mean_cpu_util,
        cpu_threshold,
        // tolerate representation error right at the threshold
        cpu_floor: mean_cpu_util >= cpu_threshold - 1e-12,
    }
}
