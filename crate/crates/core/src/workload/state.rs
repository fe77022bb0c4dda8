use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, MutexGuard, RwLock, RwLockReadGuard, RwLockWriteGuard};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use super::fixture::{generate_fixture, RelationalFixture};
use super::WorkloadConfig;

pub(crate) fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    // a panicking handler must not take the endpoint down with it
    m.lock().unwrap_or_else(|e| e.into_inner())
}

pub(crate) fn read<T>(m: &RwLock<T>) -> RwLockReadGuard<'_, T> {
    m.read().unwrap_or_else(|e| e.into_inner())
}

pub(crate) fn write<T>(m: &RwLock<T>) -> RwLockWriteGuard<'_, T> {
    m.write().unwrap_or_else(|e| e.into_inner())
}

#[derive(Debug, Clone)]
pub struct RampItem {
    pub key: u64,
    pub payload: Vec<u8>,
}

#[derive(Debug, Default)]
pub struct GodCounters {
    pub request_count: u64,
    pub error_count: u64,
    pub cache: HashMap<String, Value>,
    pub storage: Vec<Value>,
}

/// The single process-wide region One-Lane Bridge funnels every caller through.
#[derive(Debug, Default)]
pub struct BridgeGate {
    pub(crate) lock: Mutex<u64>,
    pub(crate) occupancy: AtomicUsize,
    pub(crate) max_occupancy: AtomicUsize,
}

impl BridgeGate {
    /// Requests that have crossed the bridge.
    pub fn crossings(&self) -> u64 {
        *lock(&self.lock)
    }

    /// Highest number of callers ever seen inside the critical section at once.
    pub fn max_occupancy(&self) -> usize {
        self.max_occupancy.load(Ordering::SeqCst)
    }
}

/// Work debt left behind by heavy windows, in kernel steps.
#[derive(Debug, Default)]
pub struct JamClock {
    pub debt: f64,
    pub last_s: f64,
}

pub struct ServiceState {
    pub config: WorkloadConfig,
    pub fixture: Arc<RelationalFixture>,
    pub ramp_store: RwLock<Vec<RampItem>>,
    pub unbalanced_store: Mutex<Vec<Vec<u8>>>,
    pub god_counters: Mutex<GodCounters>,
    pub bridge_gate: BridgeGate,
    pub jam_clock: Mutex<JamClock>,
    pub(crate) rng: Mutex<ChaCha8Rng>,
    started: Instant,
}

impl ServiceState {
    pub fn new(config: WorkloadConfig) -> Self {
        let fixture = Arc::new(generate_fixture(config.dataset_seed, config.dataset_scale));
        Self::with_fixture(config, fixture)
    }

    pub fn with_fixture(config: WorkloadConfig, fixture: Arc<RelationalFixture>) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
        Self {
            config,
            fixture,
            ramp_store: RwLock::new(Vec::new()),
            unbalanced_store: Mutex::new(Vec::new()),
            god_counters: Mutex::new(GodCounters::default()),
            bridge_gate: BridgeGate::default(),
            jam_clock: Mutex::new(JamClock::default()),
            rng: Mutex::new(rng),
            started: Instant::now(),
        }
    }

    /// Seconds since the state was created, on the monotonic clock.
    pub fn uptime_s(&self) -> f64 {
        self.started.elapsed().as_secs_f64()
    }

    pub fn ramp_len(&self) -> usize {
        read(&self.ramp_store).len()
    }

    pub fn god_totals(&self) -> (u64, u64) {
        let g = lock(&self.god_counters);
        (g.request_count, g.error_count)
    }
}
