use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::sampler::{HostPower, PowerSource};
use super::{EnergyDomain, EnergyReading};
use crate::clock::{epoch_ms, mono_us};
use crate::error::{Error, Result};

pub const DEFAULT_POWERCAP_ROOT: &str = "/sys/class/powercap";

#[derive(Debug, Clone, PartialEq)]
pub struct RaplZone {
    pub domain: EnergyDomain,
    pub name: String,
    pub dir: PathBuf,
}

/// Discovered RAPL zones under a powercap root.
#[derive(Debug, Clone)]
pub struct RaplReader {
    zones: Vec<RaplZone>,
}

fn capability(msg: String) -> Error {
    Error::Capability(format!("{msg}; RAPL power is unavailable here, use the simulated backend (--backend sim)"))
}

fn read_u64(path: &Path) -> Result<u64> {
    let text = fs::read_to_string(path).map_err(|e| capability(format!("cannot read {}: {e}", path.display())))?;
    text.trim()
        .parse()
        .map_err(|_| Error::Parse { what: "energy counter", path: path.to_path_buf(), detail: text.trim().to_string() })
}

impl RaplReader {
    pub fn discover(root: &Path) -> Result<Self> {
        let entries = fs::read_dir(root).map_err(|e| capability(format!("cannot list {}: {e}", root.display())))?;
        let mut zones = Vec::new();
        for entry in entries.flatten() {
            let dir = entry.path();
            let Ok(name) = fs::read_to_string(dir.join("name")) else { continue };
            let name = name.trim();
            let domain = if name.starts_with("package") {
                EnergyDomain::CpuPackage
            } else if name == "dram" {
                EnergyDomain::Dram
            } else {
                continue;
            };
            if !dir.join("energy_uj").exists() {
                continue;
            }
            zones.push(RaplZone { domain, name: entry.file_name().to_string_lossy().into_owned(), dir });
        }
        zones.sort_by(|a, b| a.name.cmp(&b.name));
        if !zones.iter().any(|z| z.domain == EnergyDomain::CpuPackage) {
            return Err(capability(format!("no RAPL package zone under {}", root.display())));
        }
        let reader = Self { zones };
        // surface permission problems now rather than mid-trial
        for z in &reader.zones {
            reader.read_zone(z)?;
        }
        Ok(reader)
    }

    pub fn zones(&self) -> &[RaplZone] {
        &self.zones
    }

    pub fn has(&self, domain: EnergyDomain) -> bool {
        self.zones.iter().any(|z| z.domain == domain)
    }

    pub fn read_zone(&self, zone: &RaplZone) -> Result<EnergyReading> {
        let energy_uj = read_u64(&zone.dir.join("energy_uj"))?;
        let max_range_uj = read_u64(&zone.dir.join("max_energy_range_uj"))?;
        Ok(EnergyReading {
            domain: zone.domain,
            zone: zone.name.clone(),
            energy_uj,
            max_range_uj,
            t_ms: epoch_ms(),
            mono_us: mono_us(),
        })
    }

    /// One reading per zone of `domain` (one per socket).
    pub fn read_energy(&self, domain: EnergyDomain) -> Result<Vec<EnergyReading>> {
        let out: Vec<_> = self.zones.iter().filter(|z| z.domain == domain).map(|z| self.read_zone(z)).collect::<Result<_>>()?;
        if out.is_empty() {
            return Err(capability(format!("no {} zone", domain.as_str())));
        }
        Ok(out)
    }
}

/// Average power in watts between two readings of the same counter.
///
/// A current value below the previous one is a single wrap of the counter.
pub fn power_from_deltas(prev: &EnergyReading, curr: &EnergyReading) -> Result<f64> {
    if prev.domain != curr.domain || prev.zone != curr.zone {
        return Err(Error::Runtime(format!(
            "readings come from different counters ({} vs {})",
            prev.zone, curr.zone
        )));
    }
    if curr.mono_us <= prev.mono_us {
        return Err(Error::Runtime("energy readings are not strictly ordered in time".into()));
    }
    let range = curr.max_range_uj;
    if prev.energy_uj > range || curr.energy_uj > range {
        return Err(Error::Runtime(format!("energy counter exceeds its range of {range} µJ")));
    }
    let delta = if curr.energy_uj >= prev.energy_uj {
        curr.energy_uj - prev.energy_uj
    } else {
        range - prev.energy_uj + curr.energy_uj
    };
    Ok(delta as f64 / (curr.mono_us - prev.mono_us) as f64)
}

/// Host package and DRAM power from successive counter reads; sockets are summed.
pub struct RaplPower {
    reader: RaplReader,
    prev: BTreeMap<String, EnergyReading>,
}

impl RaplPower {
    pub fn new(reader: RaplReader) -> Self {
        Self { reader, prev: BTreeMap::new() }
    }

    pub fn open(root: &Path) -> Result<Self> {
        Ok(Self::new(RaplReader::discover(root)?))
    }

    pub fn open_default() -> Result<Self> {
        if !cfg!(target_os = "linux") {
            return Err(capability("powercap is a Linux interface".into()));
        }
        Self::open(Path::new(DEFAULT_POWERCAP_ROOT))
    }

    fn read_all(&mut self) -> Result<BTreeMap<String, EnergyReading>> {
        self.reader.zones.iter().map(|z| Ok((z.name.clone(), self.reader.read_zone(z)?))).collect()
    }
}

impl PowerSource for RaplPower {
    fn prime(&mut self) -> Result<()> {
        self.prev = self.read_all()?;
        Ok(())
    }

    fn sample(&mut self) -> Result<HostPower> {
        let curr = self.read_all()?;
        let mut package = 0.0;
        let mut dram = None::<f64>;
        for (name, reading) in &curr {
            let Some(prev) = self.prev.get(name) else { continue };
            let w = power_from_deltas(prev, reading)?;
            match reading.domain {
                EnergyDomain::CpuPackage => package += w,
                EnergyDomain::Dram => *dram.get_or_insert(0.0) += w,
            }
        }
        self.prev = curr;
        Ok(HostPower { package_w: package, dram_w: dram })
    }
}
