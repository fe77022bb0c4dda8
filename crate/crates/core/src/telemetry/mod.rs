//! Power and resource sampling.
//!
//! The real backend reads RAPL energy counters through powercap and process
//! accounting from procfs; the simulated backend derives power from resource
//! samples and binned response time after the fact.

mod procfs;
mod rapl;
mod sampler;
mod sim;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub use procfs::{CpuTimes, ProcFs, ProcResources, ProcessCpuMeter};
pub use rapl::{power_from_deltas, RaplPower, RaplReader, RaplZone, DEFAULT_POWERCAP_ROOT};
pub use sampler::{
    spawn_sampler, HostPower, PowerSource, ResourceSource, ResourceTick, SampleStream, SamplerConfig,
    SamplerHandle,
};
pub use sim::{simulate_power, simulate_power_trace, SimPowerModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyDomain {
    CpuPackage,
    Dram,
}

impl EnergyDomain {
    pub fn as_str(self) -> &'static str {
        match self {
            EnergyDomain::CpuPackage => "cpu_package",
            EnergyDomain::Dram => "dram",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReading {
    pub domain: EnergyDomain,
    /// powercap zone directory the value came from.
    pub zone: String,
    pub energy_uj: u64,
    pub max_range_uj: u64,
    /// Wall clock, epoch milliseconds.
    pub t_ms: i64,
    /// Monotonic clock, microseconds; the only clock used for rates.
    pub mono_us: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerSample {
    /// Interval start, epoch seconds.
    pub t_s: i64,
    pub cpu_power_w: f64,
    /// Host-wide; absent when the host exposes no DRAM domain.
    pub dram_power_w: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResourceSample {
    pub t_s: i64,
    /// Fraction of total host capacity, so one busy core on four is 0.25.
    pub cpu_util: f64,
    pub memory_bytes: Option<u64>,
    pub disk_read_bytes: Option<u64>,
    pub disk_write_bytes: Option<u64>,
    pub net_rx_bytes: Option<u64>,
    pub net_tx_bytes: Option<u64>,
}

/// Host-scope readings kept next to the process-scope ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HostSample {
    pub t_s: i64,
    pub host_cpu_util: f64,
    pub package_power_w: Option<f64>,
}

pub fn write_power_csv(path: &Path, rows: &[PowerSample]) -> Result<()> {
    crate::csvio::write_csv(path, rows)
}

pub fn read_power_csv(path: &Path) -> Result<Vec<PowerSample>> {
    crate::csvio::read_csv(path, "power trace")
}

pub fn write_resources_csv(path: &Path, rows: &[ResourceSample]) -> Result<()> {
    crate::csvio::write_csv(path, rows)
}

pub fn read_resources_csv(path: &Path) -> Result<Vec<ResourceSample>> {
    crate::csvio::read_csv(path, "resource trace")
}

pub fn write_host_csv(path: &Path, rows: &[HostSample]) -> Result<()> {
    crate::csvio::write_csv(path, rows)
}

pub fn read_host_csv(path: &Path) -> Result<Vec<HostSample>> {
    crate::csvio::read_csv(path, "host trace")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_headers_and_absent_markers() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("power.csv");
        let rows = vec![
            PowerSample { t_s: 10, cpu_power_w: 12.5, dram_power_w: Some(1.25) },
            PowerSample { t_s: 11, cpu_power_w: 13.0, dram_power_w: None },
        ];
        write_power_csv(&p, &rows).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().next().unwrap(), "t_s,cpu_power_w,dram_power_w");
        assert_eq!(text.lines().nth(2).unwrap(), "11,13.0,");
        assert_eq!(read_power_csv(&p).unwrap(), rows);

        let r = dir.path().join("resources.csv");
        let res = vec![ResourceSample {
            t_s: 10,
            cpu_util: 0.25,
            memory_bytes: Some(1 << 20),
            disk_read_bytes: None,
            disk_write_bytes: None,
            net_rx_bytes: Some(5),
            net_tx_bytes: Some(6),
        }];
        write_resources_csv(&r, &res).unwrap();
        let text = std::fs::read_to_string(&r).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "t_s,cpu_util,memory_bytes,disk_read_bytes,disk_write_bytes,net_rx_bytes,net_tx_bytes"
        );
        assert_eq!(read_resources_csv(&r).unwrap(), res);
    }
}
