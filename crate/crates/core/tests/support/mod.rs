#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::Path;

use apbench::load::{bin_response_time, LoadPlan, RequestRecord};
use apbench::orchestrator::{HostInfo, RunArtifact, RunMeta};
use apbench::telemetry::{simulate_power_trace, HostSample, ResourceSample, SimPowerModel};
use apbench::workload::{AntipatternKind, WorkloadConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const BASE_S: i64 = 1_700_000_000;

/// Parameters of a generated run: per-second traces whose power follows `model` exactly.
#[derive(Debug, Clone)]
pub struct Synthetic {
    pub repetition: usize,
    pub duration_s: i64,
    pub warmup_s: f64,
    pub cores: usize,
    pub seed: u64,
    pub model: SimPowerModel,
    /// Fixed utilisation instead of a random one per second.
    pub util: Option<f64>,
    /// Requests marked failed, taken from the end of the run.
    pub failures: usize,
}

impl Synthetic {
    pub fn new(repetition: usize, duration_s: i64, seed: u64) -> Self {
        Self {
            repetition,
            duration_s,
            warmup_s: 0.0,
            cores: 4,
            seed,
            model: SimPowerModel::default(),
            util: None,
            failures: 0,
        }
    }
}

pub fn rt_map(records: &[RequestRecord]) -> BTreeMap<i64, f64> {
    bin_response_time(records, 1).into_iter().filter_map(|(t, v)| Some((t, v?))).collect()
}

pub fn synthetic_artifact(dir: &Path, s: &Synthetic) -> RunArtifact {
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let base = BASE_S + 10_000 * s.repetition as i64;
    let mut requests = Vec::new();
    let mut resources = Vec::new();
    let mut host = Vec::new();
    for i in 0..s.duration_s {
        let t = base + i;
        let util = s.util.unwrap_or_else(|| rng.random_range(0.1..0.9));
        let rate: u32 = rng.random_range(5..30);
        for k in 0..rate {
            let completion = (t * 1000) as f64 + (k as f64 + 0.5) * 1000.0 / rate as f64;
            let rt = 20.0 + 100.0 * util + rng.random_range(0.0..200.0);
            let start_ms = (completion - rt).floor() as i64;
            requests.push(RequestRecord {
                start_ms,
                response_time_ms: completion - start_ms as f64,
                success: true,
                user_id: k as usize,
            });
        }
        resources.push(ResourceSample {
            t_s: t,
            cpu_util: util,
            memory_bytes: Some(200_000_000 + rng.random_range(0..50_000_000)),
            disk_read_bytes: Some(0),
            disk_write_bytes: Some(0),
            net_rx_bytes: Some(0),
            net_tx_bytes: Some(0),
        });
        host.push(HostSample { t_s: t, host_cpu_util: (util + 0.05).min(1.0), package_power_w: None });
    }
    let n = requests.len();
    for r in requests.iter_mut().skip(n.saturating_sub(s.failures)) {
        r.success = false;
    }
    requests.sort_by_key(|r| r.start_ms);
    let power = simulate_power_trace(&s.model, &resources, &rt_map(&requests));
    let artifact = RunArtifact {
        dir: dir.to_path_buf(),
        meta: RunMeta {
            repetition: s.repetition,
            workload: WorkloadConfig::new(AntipatternKind::TheRamp),
            load: LoadPlan::new("http://synthetic/the-ramp", 50, s.duration_s as f64),
            warmup_s: s.warmup_s,
            backend: "sim".into(),
            sim_model: Some(s.model.clone()),
            power_scope: "simulated".into(),
            service: None,
            probe: Some(serde_json::json!({"status": "success", "body_summary": {"store_size": 1}})),
            host: HostInfo { cores: s.cores, hostname: None, kernel: None, governor: None },
            started_epoch_ms: base * 1000 - 11_000,
            load_started_epoch_ms: base * 1000,
            load_ended_epoch_ms: (base + s.duration_s) * 1000,
            ended_epoch_ms: (base + s.duration_s) * 1000 + 100,
            requests: n,
            failures: s.failures,
            max_in_flight: 50,
            missed_ticks: 0,
        },
        requests,
        power,
        resources,
        host,
    };
    artifact.write().expect("write synthetic artifact");
    artifact
}

/// A campaign directory of `reps` synthetic runs plus a manifest.
pub fn synthetic_campaign(dir: &Path, reps: usize, duration_s: i64, seed: u64, model: &SimPowerModel, warmup_s: f64) -> Vec<RunArtifact> {
    let mut entries = Vec::new();
    let artifacts: Vec<RunArtifact> = (0..reps)
        .map(|i| {
            let mut s = Synthetic::new(i, duration_s, seed.wrapping_mul(1000).wrapping_add(i as u64));
            s.model = SimPowerModel { seed: model.seed.wrapping_add(i as u64), ..model.clone() };
            s.warmup_s = warmup_s;
            entries.push(apbench::orchestrator::ManifestEntry {
                repetition: i,
                status: "ok".into(),
                dir: format!("rep-{i}"),
                detail: String::new(),
            });
            synthetic_artifact(&dir.join(format!("rep-{i}")), &s)
        })
        .collect();
    apbench::orchestrator::write_manifest(dir, &entries).unwrap();
    artifacts
}
