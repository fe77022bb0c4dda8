use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use tracing::warn;

use super::{HostSample, PowerSample, ResourceSample};
use crate::clock::epoch_ms;
use crate::error::{Error, Result};

/// Host-wide power over the last interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HostPower {
    pub package_w: f64,
    pub dram_w: Option<f64>,
}

/// Resource readings over the last interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResourceTick {
    /// `t_s` is filled in by the sampler.
    pub resource: ResourceSample,
    pub host_cpu_util: f64,
    /// Target's share of all busy CPU time in the interval (1 for host scope).
    pub process_share: f64,
}

/// Both source kinds are primed on the first tick and then read once per tick.
pub trait PowerSource: Send {
    fn prime(&mut self) -> Result<()>;
    fn sample(&mut self) -> Result<HostPower>;
}

pub trait ResourceSource: Send {
    fn prime(&mut self) -> Result<()>;
    fn sample(&mut self) -> Result<ResourceTick>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerConfig {
    pub interval: Duration,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self { interval: Duration::from_secs(1) }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SampleStream {
    pub power: Vec<PowerSample>,
    pub resources: Vec<ResourceSample>,
    pub host: Vec<HostSample>,
    pub missed_ticks: u64,
    /// Power samples dropped because attribution produced a negative or non-finite value.
    pub discarded: u64,
    /// Wall time between consecutive emitted samples.
    pub gaps_ms: Vec<f64>,
    /// Set when a backend failed; the stream ends at that point.
    pub error: Option<String>,
}

pub struct SamplerHandle {
    stop: Arc<AtomicBool>,
    buffer: Arc<Mutex<SampleStream>>,
    thread: JoinHandle<()>,
}

impl SamplerHandle {
    /// Copy of everything emitted so far; safe while the sampler keeps running.
    pub fn snapshot(&self) -> SampleStream {
        self.buffer.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn is_finished(&self) -> bool {
        self.thread.is_finished()
    }

    pub fn stop(self) -> SampleStream {
        self.stop.store(true, Ordering::SeqCst);
        if self.thread.join().is_err() {
            let mut b = self.buffer.lock().unwrap_or_else(|e| e.into_inner());
            b.error.get_or_insert_with(|| "sampler thread panicked".into());
        }
        Arc::try_unwrap(self.buffer)
            .map(|m| m.into_inner().unwrap_or_else(|e| e.into_inner()))
            .unwrap_or_else(|arc| arc.lock().unwrap_or_else(|e| e.into_inner()).clone())
    }
}

/// Sleeps until `deadline`; returns false if asked to stop first.
fn sleep_until(deadline: Instant, stop: &AtomicBool) -> bool {
    loop {
        if stop.load(Ordering::SeqCst) {
            return false;
        }
        let now = Instant::now();
        if now >= deadline {
            return true;
        }
        std::thread::sleep((deadline - now).min(Duration::from_millis(20)));
    }
}

/// Starts a sampling thread whose ticks sit on whole multiples of the interval
/// in wall-clock time. Each emitted sample covers one interval and is labelled
/// with the second in which that interval started.
pub fn spawn_sampler(
    config: SamplerConfig,
    mut resources: Box<dyn ResourceSource>,
    mut power: Option<Box<dyn PowerSource>>,
) -> Result<SamplerHandle> {
    let interval_ms = config.interval.as_millis() as i64;
    if interval_ms < 1 {
        return Err(Error::Usage("sampling interval must be at least 1 ms".into()));
    }
    let stop = Arc::new(AtomicBool::new(false));
    let buffer = Arc::new(Mutex::new(SampleStream::default()));
    let (stop2, buf) = (stop.clone(), buffer.clone());
    let push = move |f: &dyn Fn(&mut SampleStream)| f(&mut buf.lock().unwrap_or_else(|e| e.into_inner()));

    let thread = std::thread::Builder::new()
        .name("sampler".into())
        .spawn(move || {
            let now_ms = epoch_ms();
            let wait = interval_ms - now_ms.rem_euclid(interval_ms);
            let anchor = Instant::now() + Duration::from_millis(wait as u64);
            let anchor_ms = now_ms + wait;
            if !sleep_until(anchor, &stop2) {
                return;
            }
            let primed = resources.prime().and_then(|_| power.as_mut().map_or(Ok(()), |p| p.prime()));
            if let Err(e) = primed {
                push(&|s| s.error = Some(e.to_string()));
                return;
            }
            let mut k: i64 = 0;
            let mut last_emit = Instant::now();
            loop {
                let interval_start_ms = anchor_ms + k * interval_ms;
                k += 1;
                let target = anchor + config.interval * k as u32;
                if !sleep_until(target, &stop2) {
                    return;
                }
                let late = Instant::now().duration_since(target);
                if late >= config.interval {
                    let skipped = (late.as_millis() as i64 / interval_ms) as u64;
                    warn!(skipped, "sampler missed ticks; the next sample spans the gap");
                    k += skipped as i64;
                    push(&|s| s.missed_ticks += skipped);
                }
                let t_s = interval_start_ms.div_euclid(1000);
                let tick = match resources.sample() {
                    Ok(t) => t,
                    Err(e) => {
                        push(&|s| s.error = Some(e.to_string()));
                        return;
                    }
                };
                let hp = match power.as_mut().map(|p| p.sample()).transpose() {
                    Ok(hp) => hp,
                    Err(e) => {
                        push(&|s| s.error = Some(e.to_string()));
                        return;
                    }
                };
                let now = Instant::now();
                let gap = now.duration_since(last_emit).as_secs_f64() * 1e3;
                last_emit = now;
                push(&|s| {
                    if k > 1 || s.resources.is_empty() {
                        s.gaps_ms.push(gap);
                    }
                    s.resources.push(ResourceSample { t_s, ..tick.resource });
                    s.host.push(HostSample {
                        t_s,
                        host_cpu_util: tick.host_cpu_util,
                        package_power_w: hp.map(|h| h.package_w),
                    });
                    if let Some(hp) = hp {
                        let cpu = hp.package_w * tick.process_share;
                        let ok = cpu.is_finite() && cpu >= 0.0 && hp.dram_w.is_none_or(|d| d.is_finite() && d >= 0.0);
                        if ok {
                            s.power.push(PowerSample { t_s, cpu_power_w: cpu, dram_power_w: hp.dram_w });
                        } else {
                            s.discarded += 1;
                        }
                    }
                });
            }
        })
        .map_err(|e| Error::io("spawning sampler thread", e))?;
    Ok(SamplerHandle { stop, buffer, thread })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Fake {
        n: u64,
        fail_after: Option<u64>,
    }

    impl ResourceSource for Fake {
        fn prime(&mut self) -> Result<()> {
            Ok(())
        }
        fn sample(&mut self) -> Result<ResourceTick> {
            self.n += 1;
            if self.fail_after.is_some_and(|f| self.n > f) {
                return Err(Error::TargetGone(99));
            }
            Ok(ResourceTick {
                resource: ResourceSample {
                    t_s: 0,
                    cpu_util: 0.5,
                    memory_bytes: Some(self.n),
                    disk_read_bytes: None,
                    disk_write_bytes: None,
                    net_rx_bytes: None,
                    net_tx_bytes: None,
                },
                host_cpu_util: 0.6,
                process_share: 0.5,
            })
        }
    }

    struct Watts(Vec<f64>);

    impl PowerSource for Watts {
        fn prime(&mut self) -> Result<()> {
            Ok(())
        }
        fn sample(&mut self) -> Result<HostPower> {
            Ok(HostPower { package_w: self.0.pop().unwrap_or(10.0), dram_w: Some(1.0) })
        }
    }

    fn fast() -> SamplerConfig {
        SamplerConfig { interval: Duration::from_millis(50) }
    }

    #[test]
    fn attributes_package_power_and_drops_negatives() {
        let h = spawn_sampler(fast(), Box::new(Fake { n: 0, fail_after: None }), Some(Box::new(Watts(vec![-4.0])))).unwrap();
        std::thread::sleep(Duration::from_millis(400));
        let s = h.stop();
        assert!(s.resources.len() >= 3, "{}", s.resources.len());
        assert_eq!(s.discarded, 1);
        assert_eq!(s.power.len(), s.resources.len() - 1);
        assert!(s.power.iter().all(|p| p.cpu_power_w == 5.0 && p.cpu_power_w >= 0.0));
        assert!(s.host.iter().skip(1).all(|h| h.package_power_w == Some(10.0)));
        let mem: Vec<u64> = s.resources.iter().map(|r| r.memory_bytes.unwrap()).collect();
        assert!(mem.windows(2).all(|w| w[0] < w[1]));
        assert!(s.error.is_none());
    }

    #[test]
    fn backend_failure_ends_stream_with_error() {
        let h = spawn_sampler(fast(), Box::new(Fake { n: 0, fail_after: Some(2) }), None).unwrap();
        std::thread::sleep(Duration::from_millis(400));
        assert!(h.is_finished());
        let s = h.stop();
        assert_eq!(s.resources.len(), 2);
        assert!(s.error.unwrap().contains("99"));
        assert!(s.power.is_empty());
    }

    #[test]
    fn snapshot_while_running() {
        let h = spawn_sampler(fast(), Box::new(Fake { n: 0, fail_after: None }), None).unwrap();
        std::thread::sleep(Duration::from_millis(250));
        let early = h.snapshot();
        std::thread::sleep(Duration::from_millis(150));
        let s = h.stop();
        assert!(s.resources.len() > early.resources.len());
        assert_eq!(&s.resources[..early.resources.len()], &early.resources[..]);
    }
}
