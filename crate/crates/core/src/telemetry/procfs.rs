use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use super::sampler::{ResourceSource, ResourceTick};
use super::ResourceSample;
use crate::error::{Error, Result};

/// Aggregate jiffies from the `cpu` line of `/proc/stat`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CpuTimes {
    pub busy: u64,
    pub total: u64,
}

/// Reader over a proc filesystem rooted anywhere (tests point it at fixtures).
#[derive(Debug, Clone)]
pub struct ProcFs {
    root: PathBuf,
    clk_tck: f64,
    page_size: u64,
}

fn sysconf(name: libc::c_int, fallback: i64) -> i64 {
    let v = unsafe { libc::sysconf(name) };
    if v > 0 {
        v as i64
    } else {
        fallback
    }
}

fn key_values(text: &str) -> impl Iterator<Item = (&str, u64)> {
    text.lines().filter_map(|l| {
        let mut it = l.split_whitespace();
        let k = it.next()?.trim_end_matches(':');
        Some((k, it.next()?.parse().ok()?))
    })
}

impl ProcFs {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self {
            root: root.into(),
            clk_tck: sysconf(libc::_SC_CLK_TCK, 100) as f64,
            page_size: sysconf(libc::_SC_PAGESIZE, 4096) as u64,
        }
    }

    pub fn system() -> Self {
        Self::new("/proc")
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn clk_tck(&self) -> f64 {
        self.clk_tck
    }

    fn read(&self, rel: &str) -> std::io::Result<String> {
        fs::read_to_string(self.root.join(rel))
    }

    /// utime + stime of a process, in clock ticks.
    pub fn process_cpu_ticks(&self, pid: u32) -> Result<u64> {
        let stat = self.read(&format!("{pid}/stat")).map_err(|_| Error::TargetGone(pid))?;
        // the command name may contain spaces or parentheses; fields resume after the last ')'
        let rest = stat.rsplit_once(')').map(|(_, r)| r).unwrap_or("");
        let f: Vec<&str> = rest.split_whitespace().collect();
        let field = |i: usize| -> Result<u64> {
            f.get(i).and_then(|v| v.parse().ok()).ok_or_else(|| Error::Parse {
                what: "process stat",
                path: self.root.join(format!("{pid}/stat")),
                detail: stat.trim().to_string(),
            })
        };
        Ok(field(11)? + field(12)?)
    }

    pub fn host_cpu_times(&self) -> Result<CpuTimes> {
        let stat = self.read("stat").map_err(|e| Error::io(format!("reading {}/stat", self.root.display()), e))?;
        let line = stat.lines().find(|l| l.starts_with("cpu ")).unwrap_or("");
        let v: Vec<u64> = line.split_whitespace().skip(1).take(8).filter_map(|x| x.parse().ok()).collect();
        if v.len() < 4 {
            return Err(Error::Parse { what: "cpu line", path: self.root.join("stat"), detail: line.to_string() });
        }
        let total: u64 = v.iter().sum();
        let idle = v[3] + v.get(4).copied().unwrap_or(0);
        Ok(CpuTimes { busy: total - idle, total })
    }

    /// Online CPUs as listed in `/proc/stat`.
    pub fn host_cores(&self) -> Result<usize> {
        let stat = self.read("stat").map_err(|e| Error::io(format!("reading {}/stat", self.root.display()), e))?;
        let n = stat
            .lines()
            .filter(|l| l.starts_with("cpu") && l.as_bytes().get(3).is_some_and(u8::is_ascii_digit))
            .count();
        Ok(n.max(1))
    }

    pub fn process_memory_bytes(&self, pid: u32) -> Option<u64> {
        let statm = self.read(&format!("{pid}/statm")).ok()?;
        let resident: u64 = statm.split_whitespace().nth(1)?.parse().ok()?;
        Some(resident * self.page_size)
    }

    pub fn host_memory_bytes(&self) -> Option<u64> {
        let info = self.read("meminfo").ok()?;
        let (mut total, mut avail) = (None, None);
        for (k, v) in key_values(&info) {
            match k {
                "MemTotal" => total = Some(v),
                "MemAvailable" => avail = Some(v),
                _ => {}
            }
        }
        Some(total?.saturating_sub(avail?) * 1024)
    }

    /// Bytes the process caused to be fetched from / sent to storage.
    pub fn process_io(&self, pid: u32) -> Option<(u64, u64)> {
        let io = self.read(&format!("{pid}/io")).ok()?;
        let (mut r, mut w) = (None, None);
        for (k, v) in key_values(&io) {
            match k {
                "read_bytes" => r = Some(v),
                "write_bytes" => w = Some(v),
                _ => {}
            }
        }
        Some((r?, w?))
    }

    pub fn host_io(&self) -> Option<(u64, u64)> {
        let vm = self.read("vmstat").ok()?;
        let (mut r, mut w) = (None, None);
        for (k, v) in key_values(&vm) {
            match k {
                "pgpgin" => r = Some(v * 1024),
                "pgpgout" => w = Some(v * 1024),
                _ => {}
            }
        }
        Some((r?, w?))
    }

    /// Received and transmitted bytes summed over every interface, loopback included
    /// (a single-host run talks to its service over loopback).
    pub fn net_bytes(&self, pid: Option<u32>) -> Option<(u64, u64)> {
        let rel = pid.map_or_else(|| "net/dev".to_string(), |p| format!("{p}/net/dev"));
        let dev = self.read(&rel).ok()?;
        let mut sum = (0u64, 0u64);
        for line in dev.lines().skip(2) {
            let (_, counters) = line.split_once(':')?;
            let v: Vec<u64> = counters.split_whitespace().filter_map(|x| x.parse().ok()).collect();
            if v.len() < 9 {
                return None;
            }
            sum.0 += v[0];
            sum.1 += v[8];
        }
        Some(sum)
    }
}

/// Process CPU time over wall time, as a fraction of every core on the host.
pub struct ProcessCpuMeter {
    fs: ProcFs,
    pid: u32,
    cores: usize,
    prev_ticks: u64,
    prev_at: Instant,
}

impl ProcessCpuMeter {
    pub fn new(fs: ProcFs, pid: u32) -> Result<Self> {
        let cores = fs.host_cores()?;
        Self::with_cores(fs, pid, cores)
    }

    pub fn with_cores(fs: ProcFs, pid: u32, cores: usize) -> Result<Self> {
        let prev_ticks = fs.process_cpu_ticks(pid)?;
        Ok(Self { fs, pid, cores: cores.max(1), prev_ticks, prev_at: Instant::now() })
    }

    /// Utilisation since the previous call (or construction).
    pub fn sample(&mut self) -> Result<f64> {
        let ticks = self.fs.process_cpu_ticks(self.pid)?;
        let now = Instant::now();
        let wall = now.duration_since(self.prev_at).as_secs_f64();
        let cpu_s = ticks.saturating_sub(self.prev_ticks) as f64 / self.fs.clk_tck;
        self.prev_ticks = ticks;
        self.prev_at = now;
        if wall <= 0.0 {
            return Ok(0.0);
        }
        Ok((cpu_s / wall / self.cores as f64).clamp(0.0, 1.0))
    }
}

/// Resource snapshots of one process, or of the whole host when no process is given.
pub struct ProcResources {
    fs: ProcFs,
    target: Option<u32>,
    cores: usize,
    prev: Option<(u64, CpuTimes, Instant)>,
}

impl ProcResources {
    pub fn new(fs: ProcFs, target: Option<u32>) -> Result<Self> {
        let cores = fs.host_cores()?;
        Ok(Self { fs, target, cores, prev: None })
    }

    pub fn cores(&self) -> usize {
        self.cores
    }

    fn snapshot(&self) -> Result<(u64, CpuTimes, Instant)> {
        let ticks = match self.target {
            Some(pid) => self.fs.process_cpu_ticks(pid)?,
            None => 0,
        };
        Ok((ticks, self.fs.host_cpu_times()?, Instant::now()))
    }
}

impl ResourceSource for ProcResources {
    fn prime(&mut self) -> Result<()> {
        self.prev = Some(self.snapshot()?);
        Ok(())
    }

    fn sample(&mut self) -> Result<ResourceTick> {
        let (ticks, host, at) = self.snapshot()?;
        let (p_ticks, p_host, p_at) = self.prev.replace((ticks, host, at)).unwrap_or((ticks, host, at));
        let wall = at.duration_since(p_at).as_secs_f64();
        let d_busy = host.busy.saturating_sub(p_host.busy);
        let d_total = host.total.saturating_sub(p_host.total);
        let host_util = if d_total > 0 { d_busy as f64 / d_total as f64 } else { 0.0 };
        let d_ticks = ticks.saturating_sub(p_ticks);
        let (cpu_util, share) = match self.target {
            Some(_) => {
                let util = if wall > 0.0 {
                    d_ticks as f64 / self.fs.clk_tck / wall / self.cores as f64
                } else {
                    0.0
                };
                let share = if d_busy > 0 { d_ticks as f64 / d_busy as f64 } else { 0.0 };
                (util, share)
            }
            None => (host_util, 1.0),
        };
        let (memory, io, net) = match self.target {
            Some(pid) => (self.fs.process_memory_bytes(pid), self.fs.process_io(pid), self.fs.net_bytes(Some(pid))),
            None => (self.fs.host_memory_bytes(), self.fs.host_io(), self.fs.net_bytes(None)),
        };
        Ok(ResourceTick {
            resource: ResourceSample {
                t_s: 0,
                cpu_util: cpu_util.clamp(0.0, 1.0),
                memory_bytes: memory,
                disk_read_bytes: io.map(|v| v.0),
                disk_write_bytes: io.map(|v| v.1),
                net_rx_bytes: net.map(|v| v.0),
                net_tx_bytes: net.map(|v| v.1),
            },
            host_cpu_util: host_util.clamp(0.0, 1.0),
            process_share: share.clamp(0.0, 1.0),
        })
    }
}
