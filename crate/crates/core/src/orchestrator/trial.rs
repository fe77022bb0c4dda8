use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Child, Command, Stdio};
use std::sync::mpsc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use tracing::{info, warn};

use super::artifact::{write_failure, write_manifest, FailureMark, HostInfo, ManifestEntry, RunArtifact, RunMeta};
use super::{rep_dir_name, ExperimentPlan, PowerBackend, ServiceLaunch};
use crate::clock::epoch_ms;
use crate::error::{Error, Result};
use crate::load::{bin_response_time, run_load};
use crate::telemetry::{
    simulate_power_trace, spawn_sampler, PowerSource, ProcFs, ProcResources, RaplPower, SamplerConfig,
};
use crate::workload::{ServiceMeta, WorkloadConfig};

/// A service child process. Dropping it kills the process.
pub struct ServiceProcess {
    child: Child,
    pub meta: ServiceMeta,
}

impl ServiceProcess {
    /// Starts `program serve` on a free loopback port and waits for its startup record.
    pub fn launch(workload: &WorkloadConfig, launch: &ServiceLaunch) -> Result<Self> {
        let config = serde_json::to_string(workload).map_err(|e| Error::Runtime(e.to_string()))?;
        let mut cmd = Command::new(&launch.program);
        cmd.args(["serve", "--port", "0", "--config-json", &config]);
        if let Some(core) = launch.pin_core {
            cmd.args(["--pin-core", &core.to_string()]);
        }
        if let Some(mb) = launch.memory_limit_mb {
            cmd.args(["--memory-limit-mb", &mb.to_string()]);
        }
        if let Some(ms) = launch.calibrate_target_ms {
            cmd.args(["--calibrate-target-ms", &ms.to_string()]);
        }
        if std::env::var_os("RUST_LOG").is_none() {
            cmd.env("RUST_LOG", "warn");
        }
        cmd.stdin(Stdio::null()).stdout(Stdio::piped()).stderr(Stdio::inherit());
        let mut child = cmd
            .spawn()
            .map_err(|e| Error::io(format!("starting {}", launch.program.display()), e))?;

        let stdout = child.stdout.take().expect("stdout is piped");
        let (tx, rx) = mpsc::channel::<String>();
        std::thread::spawn(move || {
            // keeps draining after the first line so the child never blocks on a full pipe
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    continue;
                }
            }
        });

        let deadline = Instant::now() + Duration::from_secs_f64(launch.startup_timeout_s);
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            match rx.recv_timeout(left) {
                Ok(line) if line.trim_start().starts_with('{') => {
                    let meta: ServiceMeta = match serde_json::from_str(&line) {
                        Ok(m) => m,
                        Err(e) => {
                            let _ = child.kill();
                            let _ = child.wait();
                            return Err(Error::Runtime(format!("unreadable startup record: {e}")));
                        }
                    };
                    return Ok(Self { child, meta });
                }
                Ok(_) => continue,
                Err(mpsc::RecvTimeoutError::Timeout) => {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Err(Error::Runtime(format!(
                        "service did not report readiness within {} s",
                        launch.startup_timeout_s
                    )));
                }
                Err(mpsc::RecvTimeoutError::Disconnected) => {
                    let status = child.wait().map(|s| s.to_string()).unwrap_or_else(|e| e.to_string());
                    return Err(Error::Runtime(format!("service exited before becoming ready ({status})")));
                }
            }
        }
    }

    pub fn pid(&self) -> u32 {
        self.child.id()
    }

    pub fn url(&self) -> String {
        format!("http://{}/{}", self.meta.addr, self.meta.config.kind.slug())
    }

    pub fn is_running(&mut self) -> bool {
        matches!(self.child.try_wait(), Ok(None))
    }

    /// SIGTERM, then SIGKILL if the process is still around after `grace`.
    pub fn terminate(mut self, grace: Duration) -> Result<()> {
        #[cfg(unix)]
        unsafe {
            libc::kill(self.child.id() as libc::pid_t, libc::SIGTERM);
        }
        let deadline = Instant::now() + grace;
        while Instant::now() < deadline {
            match self.child.try_wait() {
                Ok(Some(_)) => return Ok(()),
                Ok(None) => std::thread::sleep(Duration::from_millis(20)),
                Err(e) => return Err(Error::io("waiting for the service", e)),
            }
        }
        warn!(pid = self.child.id(), "service ignored SIGTERM; killing");
        self.child.kill().map_err(|e| Error::io("killing the service", e))?;
        self.child.wait().map_err(|e| Error::io("waiting for the service", e))?;
        Ok(())
    }
}

impl Drop for ServiceProcess {
    fn drop(&mut self) {
        if let Ok(None) = self.child.try_wait() {
            let _ = self.child.kill();
            let _ = self.child.wait();
        }
    }
}

type Staged<T> = std::result::Result<T, (&'static str, Error)>;

fn at(stage: &'static str) -> impl Fn(Error) -> (&'static str, Error) {
    move |e| (stage, e)
}

fn ensure_writable(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    let probe = dir.join(".writable");
    fs::write(&probe, b"").map_err(|e| Error::io(format!("writing into {}", dir.display()), e))?;
    let _ = fs::remove_file(&probe);
    let _ = fs::remove_file(dir.join(super::FAILED_FILE));
    Ok(())
}

async fn probe_service(url: &str, timeout_s: f64) -> Result<Value> {
    let client = reqwest::Client::builder()
        .timeout(Duration::from_secs_f64(timeout_s))
        .build()
        .map_err(|e| Error::Runtime(e.to_string()))?;
    let resp = client.get(url).send().await.map_err(|e| Error::Runtime(format!("probe request: {e}")))?;
    let status = resp.status();
    let body: Value = resp.json().await.map_err(|e| Error::Runtime(format!("probe reply: {e}")))?;
    if !status.is_success() {
        return Err(Error::Runtime(format!("probe returned {status}: {body}")));
    }
    Ok(body)
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T> + Send + 'static) -> Result<T> {
    tokio::task::spawn_blocking(f).await.map_err(|e| Error::Runtime(format!("blocking task failed: {e}")))?
}

async fn run_trial(plan: &ExperimentPlan, repetition: usize, dir: &Path) -> Staged<RunArtifact> {
    plan.validate().map_err(at("prepare"))?;
    ensure_writable(dir).map_err(at("prepare"))?;
    let fs_root = ProcFs::new(&plan.proc_root);
    let cores = fs_root.host_cores().map_err(at("prepare"))?;
    let started_epoch_ms = epoch_ms();

    let (service, url) = match &plan.target_url {
        Some(url) => (None, url.clone()),
        None => {
            let (workload, launch) = (plan.workload.clone(), plan.service.clone());
            let svc = blocking(move || ServiceProcess::launch(&workload, &launch)).await.map_err(at("launch"))?;
            let url = svc.url();
            (Some(svc), url)
        }
    };
    let pid = service.as_ref().map(ServiceProcess::pid);
    info!(repetition, %url, ?pid, "service up; settling");
    tokio::time::sleep(Duration::from_secs_f64(plan.settle_s)).await;

    let probe = probe_service(&url, plan.load.timeout_s).await.map_err(at("probe"))?;

    let resources = ProcResources::new(fs_root, pid).map_err(at("sample"))?;
    let power: Option<Box<dyn PowerSource>> = match &plan.power_backend {
        PowerBackend::Real { powercap_root } => {
            Some(Box::new(RaplPower::open(powercap_root).map_err(at("sample"))?))
        }
        PowerBackend::Simulated(_) => None,
    };
    let sampler = spawn_sampler(SamplerConfig::default(), Box::new(resources), power).map_err(at("sample"))?;

    let mut load = plan.load.clone();
    load.endpoint = url;
    let log = run_load(&load).await;
    let stream = sampler.stop();
    let log = log.map_err(at("load"))?;
    if let Some(e) = stream.error {
        return Err(("sample", Error::Runtime(e)));
    }
    if stream.missed_ticks > 0 {
        warn!(repetition, missed = stream.missed_ticks, "sampler missed ticks");
    }

    let service_meta = match service {
        Some(svc) => {
            let meta = svc.meta.clone();
            blocking(move || svc.terminate(Duration::from_secs(10))).await.map_err(at("stop"))?;
            Some(meta)
        }
        None => None,
    };

    let (power, sim_model, power_scope) = match &plan.power_backend {
        PowerBackend::Real { .. } => {
            (stream.power, None, "package power attributed by process CPU share; DRAM host-wide")
        }
        PowerBackend::Simulated(model) => {
            let mut model = model.clone();
            model.seed = model.seed.wrapping_add(repetition as u64);
            let rt: BTreeMap<i64, f64> =
                bin_response_time(&log.records, 1).into_iter().filter_map(|(t, v)| Some((t, v?))).collect();
            let power = simulate_power_trace(&model, &stream.resources, &rt);
            (power, Some(model), "simulated from process resources and response time")
        }
    };

    let artifact = RunArtifact {
        dir: dir.to_path_buf(),
        meta: RunMeta {
            repetition,
            workload: plan.workload.clone(),
            load: log.plan.clone(),
            warmup_s: plan.warmup_s,
            backend: plan.power_backend.name().into(),
            sim_model,
            power_scope: power_scope.into(),
            service: service_meta,
            probe: Some(probe),
            host: HostInfo::detect(cores),
            started_epoch_ms,
            load_started_epoch_ms: log.started_epoch_ms,
            load_ended_epoch_ms: log.ended_epoch_ms,
            ended_epoch_ms: epoch_ms(),
            requests: log.records.len(),
            failures: log.failure_count(),
            max_in_flight: log.max_in_flight,
            missed_ticks: stream.missed_ticks,
        },
        requests: log.records,
        power,
        resources: stream.resources,
        host: stream.host,
    };
    artifact.write().map_err(at("write"))?;
    info!(repetition, requests = artifact.meta.requests, failures = artifact.meta.failures, "trial complete");
    Ok(artifact)
}

/// Runs one repetition. On failure the repetition directory gets a failure mark
/// naming the stage, and the service (if started) is gone when this returns.
pub async fn execute_trial(plan: &ExperimentPlan, repetition: usize) -> Result<RunArtifact> {
    let dir = plan.rep_dir(repetition);
    let outcome = run_trial(plan, repetition, &dir).await;
    if plan.cooldown_s > 0.0 {
        tokio::time::sleep(Duration::from_secs_f64(plan.cooldown_s)).await;
    }
    outcome.map_err(|(stage, err)| {
        let mark = FailureMark { repetition, stage: stage.into(), cause: err.to_string() };
        warn!(repetition, stage, cause = %mark.cause, "trial failed");
        if let Err(e) = write_failure(&dir, &mark) {
            warn!(repetition, error = %e, "could not record the failure");
        }
        Error::Trial { stage: mark.stage, cause: mark.cause }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub entries: Vec<ManifestEntry>,
    pub estimate_s: f64,
    pub elapsed_s: f64,
}

impl CampaignSummary {
    pub fn ok_count(&self) -> usize {
        self.entries.iter().filter(|e| e.ok()).count()
    }
}

/// Runs every repetition in sequence. Individual trial failures are recorded in the
/// manifest and do not stop the campaign; plan and capability problems stop it before the first trial.
pub async fn run_campaign(plan: &ExperimentPlan) -> Result<CampaignSummary> {
    plan.validate()?;
    plan.check_capabilities()?;
    fs::create_dir_all(&plan.out_dir).map_err(|e| Error::io(format!("creating {}", plan.out_dir.display()), e))?;
    let echo = serde_json::to_string_pretty(plan).map_err(|e| Error::Runtime(e.to_string()))? + "\n";
    let echo_path = plan.out_dir.join("campaign.json");
    fs::write(&echo_path, echo).map_err(|e| Error::io(format!("writing {}", echo_path.display()), e))?;

    let estimate_s = plan.estimate_s();
    info!(
        repetitions = plan.repetitions,
        estimate_min = format!("{:.1}", estimate_s / 60.0),
        "campaign starting"
    );
    let t0 = Instant::now();
    let mut entries = Vec::with_capacity(plan.repetitions);
    for repetition in 0..plan.repetitions {
        let entry = match execute_trial(plan, repetition).await {
            Ok(_) => ManifestEntry { repetition, status: "ok".into(), dir: rep_dir_name(repetition), detail: String::new() },
            Err(Error::Trial { stage, cause }) => ManifestEntry {
                repetition,
                status: "failed".into(),
                dir: rep_dir_name(repetition),
                detail: format!("{stage}: {cause}"),
            },
            Err(e) => return Err(e),
        };
        entries.push(entry);
        write_manifest(&plan.out_dir, &entries)?;
    }
    Ok(CampaignSummary { entries, estimate_s, elapsed_s: t0.elapsed().as_secs_f64() })
}
