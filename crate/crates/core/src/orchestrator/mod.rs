//! Trial protocol: relaunch, settle, sample, load, stop, cool down, repeat.

mod artifact;
mod trial;
mod trim;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::load::LoadPlan;
use crate::telemetry::{RaplReader, SimPowerModel};
use crate::workload::{AntipatternKind, WorkloadConfig};

pub use artifact::{
    load_campaign, read_manifest, rep_dir_name, write_failure, write_manifest, FailureMark, HostInfo,
    ManifestEntry, RunArtifact, RunMeta, FAILED_FILE, MANIFEST_FILE, META_FILE,
};
pub use trial::{execute_trial, run_campaign, CampaignSummary, ServiceProcess};
pub use trim::{cpu_floor_threshold, trim_warmup, validity_check, TrimmedView, ValidityReport, CPU_FLOOR_PER_CORE};

/// Per-trial overhead not covered by the plan: process start, fixture build, shutdown.
pub const LAUNCH_OVERHEAD_S: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PowerBackend {
    Real { powercap_root: PathBuf },
    Simulated(SimPowerModel),
}

impl PowerBackend {
    pub fn real() -> Self {
        PowerBackend::Real { powercap_root: PathBuf::from(crate::telemetry::DEFAULT_POWERCAP_ROOT) }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PowerBackend::Real { .. } => "real",
            PowerBackend::Simulated(_) => "sim",
        }
    }
}

/// How the service child process is started.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceLaunch {
    /// Executable that understands the `serve` subcommand.
    pub program: PathBuf,
    pub pin_core: Option<usize>,
    pub memory_limit_mb: Option<u64>,
    pub calibrate_target_ms: Option<f64>,
    pub startup_timeout_s: f64,
}

impl ServiceLaunch {
    pub fn new(program: impl Into<PathBuf>) -> Self {
        Self { program: program.into(), pin_core: None, memory_limit_mb: None, calibrate_target_ms: None, startup_timeout_s: 60.0 }
    }

    /// The running executable, which is the CLI when invoked from it.
    pub fn current_exe() -> Result<Self> {
        let exe = std::env::current_exe().map_err(|e| Error::io("locating the current executable", e))?;
        Ok(Self::new(exe))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub workload: WorkloadConfig,
    /// `endpoint` is filled in per trial when the service is launched locally.
    pub load: LoadPlan,
    pub warmup_s: f64,
    pub cooldown_s: f64,
    pub settle_s: f64,
    pub repetitions: usize,
    pub power_backend: PowerBackend,
    pub out_dir: PathBuf,
    pub service: ServiceLaunch,
    /// Drive an already-running service instead of launching one. Resources are then host-wide.
    pub target_url: Option<String>,
    pub proc_root: PathBuf,
}

impl ExperimentPlan {
    /// Full-scale protocol: 20 minute load phase, 120 s warm-up, 30 repetitions.
    pub fn full_scale(kind: AntipatternKind, out_dir: impl Into<PathBuf>, service: ServiceLaunch) -> Self {
        Self {
            workload: WorkloadConfig::new(kind),
            load: LoadPlan::new("", kind.default_users(), 1200.0),
            warmup_s: 120.0,
            cooldown_s: 30.0,
            settle_s: 10.0,
            repetitions: 30,
            power_backend: PowerBackend::real(),
            out_dir: out_dir.into(),
            service,
            target_url: None,
            proc_root: PathBuf::from("/proc"),
        }
    }

    /// Minutes instead of hours: 180 s load, 30 s warm-up, 5 repetitions.
    pub fn desk_scale(kind: AntipatternKind, out_dir: impl Into<PathBuf>, service: ServiceLaunch) -> Self {
        Self {
            load: LoadPlan::new("", kind.default_users(), 180.0),
            warmup_s: 30.0,
            repetitions: 5,
            ..Self::full_scale(kind, out_dir, service)
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.workload.validate()?;
        let mut load = self.load.clone();
        if load.endpoint.is_empty() {
            load.endpoint = "http://127.0.0.1/".into();
        }
        load.validate()?;
        if self.repetitions == 0 {
            return Err(Error::Usage("at least one repetition is required".into()));
        }
        if !(self.warmup_s >= 0.0 && self.warmup_s < self.load.duration_s) {
            return Err(Error::Usage(format!(
                "warm-up ({} s) must be non-negative and shorter than the load duration ({} s)",
                self.warmup_s, self.load.duration_s
            )));
        }
        for (name, v) in [("cool-down", self.cooldown_s), ("settle time", self.settle_s)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Usage(format!("{name} must be non-negative, got {v}")));
            }
        }
        if let PowerBackend::Simulated(model) = &self.power_backend {
            model.validate()?;
        }
        Ok(())
    }

    /// Fails with a capability error when the real backend has no energy counters to read.
    pub fn check_capabilities(&self) -> Result<()> {
        if let PowerBackend::Real { powercap_root } = &self.power_backend {
            RaplReader::discover(powercap_root)?;
        }
        Ok(())
    }

    pub fn trial_estimate_s(&self) -> f64 {
        LAUNCH_OVERHEAD_S + self.settle_s + self.load.duration_s + self.cooldown_s
    }

    pub fn estimate_s(&self) -> f64 {
        self.repetitions as f64 * self.trial_estimate_s()
    }

    pub fn rep_dir(&self, repetition: usize) -> PathBuf {
        self.out_dir.join(rep_dir_name(repetition))
    }
}

/// Wall time of running every antipattern at full scale, in hours.
pub fn full_campaign_estimate_h(program: &Path) -> f64 {
    AntipatternKind::ALL
        .iter()
        .map(|&k| ExperimentPlan::full_scale(k, "", ServiceLaunch::new(program)).estimate_s())
        .sum::<f64>()
        / 3600.0
}
