use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::sync::atomic::Ordering;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::fixture::{hex, Customer, RelationalFixture};
use super::kernels::{fnv1a, hash_rounds, spin_units, wasted_math};
use super::state::{lock, read, write, RampItem, ServiceState};
use super::AntipatternKind;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Success,
    Failure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkResponse {
    pub status: Status,
    pub body_summary: Value,
    pub server_elapsed_ms: f64,
}

impl WorkResponse {
    fn done(t0: Instant, body_summary: Value) -> Self {
        Self {
            status: Status::Success,
            body_summary,
            server_elapsed_ms: t0.elapsed().as_secs_f64() * 1e3,
        }
    }

    pub fn failure(message: &str, elapsed_ms: f64) -> Self {
        Self {
            status: Status::Failure,
            body_summary: json!({ "error": message }),
            server_elapsed_ms: elapsed_ms.max(0.0),
        }
    }

    /// Shorthand for `body_summary[key]`.
    pub fn get(&self, key: &str) -> &Value {
        &self.body_summary[key]
    }
}

/// What the HTTP layer extracted from one request.
#[derive(Debug, Clone, Default)]
pub struct RequestParams {
    pub raw_query: String,
    pub body: Vec<u8>,
}

impl RequestParams {
    pub fn query(raw_query: &str) -> Self {
        Self { raw_query: raw_query.to_string(), body: Vec::new() }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.raw_query
            .split('&')
            .filter_map(|kv| kv.split_once('='))
            .find(|(k, _)| *k == key)
            .map(|(_, v)| v)
    }

    fn number<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|v| v.parse().map_err(|_| Error::Usage(format!("query parameter `{key}` is not a number: {v}"))))
            .transpose()
    }
}

/// Routes a request to the configured antipattern; `now_s` is service uptime.
pub fn dispatch(state: &ServiceState, params: &RequestParams, now_s: f64) -> Result<WorkResponse> {
    let cfg = &state.config;
    match cfg.kind {
        AntipatternKind::UnbalancedProcessing => handle_unbalanced_processing(state),
        AntipatternKind::UnnecessaryProcessing => handle_unnecessary_processing(state),
        AntipatternKind::TheRamp => handle_the_ramp(state),
        AntipatternKind::SisyphusRetrieval => {
            let page_size = params.number("page_size")?.unwrap_or(cfg.page_size);
            let page = match params.number("page")? {
                Some(p) => p,
                None => {
                    let pages = state.fixture.orders.len().div_ceil(page_size.max(1));
                    lock(&state.rng).random_range(0..pages.max(1))
                }
            };
            handle_sisyphus_retrieval(page, page_size, state)
        }
        AntipatternKind::MoreIsLess => {
            let workers = params.number("workers")?.unwrap_or(cfg.worker_count);
            let iterations = params.number("iterations")?.unwrap_or(cfg.iterations);
            handle_more_is_less(workers, iterations, state)
        }
        AntipatternKind::GodClass => {
            let payload = if params.body.is_empty() { params.raw_query.as_bytes() } else { &params.body };
            handle_god_class(payload, state)
        }
        AntipatternKind::ExcessiveDynamicAllocation => handle_excessive_dynamic_allocation(state),
        AntipatternKind::CircuitousTreasureHunt => {
            let id = match params.get("customer_id") {
                Some(id) => id.to_string(),
                None => {
                    let i = lock(&state.rng).random_range(0..state.fixture.customers.len());
                    state.fixture.customers[i].id.clone()
                }
            };
            handle_circuitous_treasure_hunt(&id, state)
        }
        AntipatternKind::OneLaneBridge => handle_one_lane_bridge(state),
        AntipatternKind::TrafficJam => handle_traffic_jam(state, now_s),
    }
}

fn random_bytes(state: &ServiceState, n: usize) -> Vec<u8> {
    let mut buf = vec![0u8; n];
    lock(&state.rng).fill_bytes(&mut buf);
    buf
}

/// Hash, validate, sort and copy a payload over and over, append it to a store
/// that never shrinks, then rebuild and re-hash the whole store. The store lock
/// is held for the entire pipeline.
pub fn handle_unbalanced_processing(state: &ServiceState) -> Result<WorkResponse> {
    let t0 = Instant::now();
    let cfg = &state.config;
    let mut payload = random_bytes(state, cfg.payload_size.max(1));
    let mut store = lock(&state.unbalanced_store);
    if store.len() >= cfg.max_store_items {
        return Err(Error::Handler(format!("store limit of {} items reached", cfg.max_store_items)));
    }
    let mut copy = Vec::new();
    for _ in 0..cfg.iterations {
        let digest = Sha256::digest(&payload);
        if payload.is_empty() || digest.len() != 32 {
            return Err(Error::Handler("payload failed validation".into()));
        }
        let mut sorted = payload.clone();
        sorted.sort_unstable();
        copy = sorted.clone();
        payload[0] ^= digest[0];
    }
    store.push(copy);
    let joined = store.concat();
    let tail = &joined[joined.len() - store.last().map_or(0, Vec::len)..];
    let churn = serde_json::to_string(&json!({ "tail": hex(tail), "items": store.len() }))
        .map_err(|e| Error::Handler(e.to_string()))?;
    let digest = hex(&Sha256::digest(churn.as_bytes())[..8]);
    let size = store.len();
    drop(store);
    Ok(WorkResponse::done(t0, json!({ "store_size": size, "digest": digest })))
}

/// Burns `iterations` steps of math whose result never reaches the reply.
pub fn handle_unnecessary_processing(state: &ServiceState) -> Result<WorkResponse> {
    let t0 = Instant::now();
    std::hint::black_box(wasted_math(state.config.iterations));
    Ok(WorkResponse::done(t0, json!({ "message": "processed" })))
}

/// Appends a random item, then scans the whole store for items matching a
/// random target and sorts the matches.
pub fn handle_the_ramp(state: &ServiceState) -> Result<WorkResponse> {
    let t0 = Instant::now();
    let cfg = &state.config;
    let (key, target) = {
        let mut rng = lock(&state.rng);
        (rng.random::<u64>(), rng.random_range(0..1024u64))
    };
    let payload = random_bytes(state, cfg.payload_size);
    let store_size = {
        let mut store = write(&state.ramp_store);
        if store.len() >= cfg.max_store_items {
            return Err(Error::Handler(format!("ramp store limit of {} items reached", cfg.max_store_items)));
        }
        store.push(RampItem { key, payload });
        store.len()
    };
    let mut matches: Vec<u64> = read(&state.ramp_store)
        .iter()
        .filter(|item| fnv1a(&item.payload) % 1024 == target)
        .map(|item| item.key)
        .collect();
    matches.sort_unstable();
    Ok(WorkResponse::done(t0, json!({ "store_size": store_size, "match_count": matches.len() })))
}

#[derive(Serialize)]
struct OrderView {
    order_id: u32,
    customer_id: String,
    company_name: String,
    city: String,
    country: String,
    order_day: u32,
    freight: f64,
    label: String,
}

/// Builds an object for every order joined with its customer, then returns one page.
pub fn handle_sisyphus_retrieval(page: usize, page_size: usize, state: &ServiceState) -> Result<WorkResponse> {
    let t0 = Instant::now();
    if page_size == 0 {
        return Err(Error::Usage("page_size must be at least 1".into()));
    }
    let f = &state.fixture;
    let customers: HashMap<&str, &Customer> = f.customers.iter().map(|c| (c.id.as_str(), c)).collect();
    let all: Vec<OrderView> = f
        .orders
        .iter()
        .filter_map(|o| {
            let c = customers.get(o.customer_id.as_str())?;
            Some(OrderView {
                order_id: o.id,
                customer_id: c.id.clone(),
                company_name: c.company_name.clone(),
                city: c.city.clone(),
                country: c.country.clone(),
                order_day: o.order_day,
                freight: o.freight,
                label: format!("#{} {} ({}, {}) {:.2}", o.id, c.company_name, c.city, c.country, o.freight),
            })
        })
        .collect();
    let scanned = all.len();
    let rows: Vec<&OrderView> = all.iter().skip(page.saturating_mul(page_size)).take(page_size).collect();
    Ok(WorkResponse::done(
        t0,
        json!({
            "page": page,
            "page_size": page_size,
            "returned": rows.len(),
            "scanned_count": scanned,
            "rows": rows,
        }),
    ))
}

const CHUNK_UNITS: u64 = 1024;

/// Work split into small chunks pulled from one shared counter.
fn chunked_run(workers: usize, iterations: u64) -> Result<u64> {
    let chunks = iterations.div_ceil(CHUNK_UNITS);
    let next = Mutex::new(0u64);
    let take = |next: &Mutex<u64>| -> Option<u64> {
        let mut n = lock(next);
        (*n < chunks).then(|| {
            *n += 1;
            *n - 1
        })
    };
    let work = |c: u64| spin_units(CHUNK_UNITS.min(iterations - c * CHUNK_UNITS), c);
    if workers == 1 {
        let mut acc = 0;
        while let Some(c) = take(&next) {
            acc ^= work(c);
        }
        return Ok(acc);
    }
    std::thread::scope(|s| {
        let mut handles = Vec::with_capacity(workers);
        for i in 0..workers {
            let h = std::thread::Builder::new()
                .name(format!("more-is-less-{i}"))
                .spawn_scoped(s, || {
                    let mut acc = 0;
                    while let Some(c) = take(&next) {
                        acc ^= work(c);
                    }
                    acc
                })
                .map_err(|e| Error::Handler(format!("cannot spawn worker {i}: {e}")))?;
            handles.push(h);
        }
        handles.into_iter().try_fold(0u64, |acc, h| {
            h.join().map(|v| acc ^ v).map_err(|_| Error::Handler("worker panicked".into()))
        })
    })
}

/// Runs the same work on `workers` threads and on one, reporting both wall times.
pub fn handle_more_is_less(workers: usize, iterations: u64, _state: &ServiceState) -> Result<WorkResponse> {
    let t0 = Instant::now();
    if workers == 0 {
        return Err(Error::Usage("workers must be at least 1".into()));
    }
    let tm = Instant::now();
    let multi = chunked_run(workers, iterations)?;
    let multi_ms = tm.elapsed().as_secs_f64() * 1e3;
    let ts = Instant::now();
    let single = chunked_run(1, iterations)?;
    let single_ms = ts.elapsed().as_secs_f64() * 1e3;
    Ok(WorkResponse::done(
        t0,
        json!({
            "workers": workers,
            "iterations": iterations,
            "multi_ms": multi_ms,
            "single_ms": single_ms,
            "same_result": multi == single,
        }),
    ))
}

/// Key/value record from a JSON object or an `a=b&c=d` string; `None` if malformed.
fn parse_payload(bytes: &[u8]) -> Option<BTreeMap<String, String>> {
    let text = std::str::from_utf8(bytes).ok()?.trim();
    let mut record = BTreeMap::new();
    if text.starts_with('{') {
        let obj: serde_json::Map<String, Value> = serde_json::from_str(text).ok()?;
        for (k, v) in obj {
            let v = match v {
                Value::String(s) => s,
                Value::Number(n) => n.to_string(),
                Value::Bool(b) => b.to_string(),
                Value::Null => String::new(),
                _ => return None,
            };
            record.insert(k, v);
        }
    } else {
        for pair in text.split('&').filter(|p| !p.is_empty()) {
            let (k, v) = pair.split_once('=')?;
            if k.is_empty() {
                return None;
            }
            record.insert(k.to_string(), v.to_string());
        }
    }
    Some(record)
}

/// A freshly opened view of the fixture; opening one costs a fixed delay and an index build.
struct FixtureSession<'a> {
    fixture: &'a RelationalFixture,
    customers: HashMap<&'a str, &'a Customer>,
}

impl<'a> FixtureSession<'a> {
    fn open(fixture: &'a RelationalFixture, cost_us: u64) -> Self {
        if cost_us > 0 {
            std::thread::sleep(Duration::from_micros(cost_us));
        }
        let customers = fixture.customers.iter().map(|c| (c.id.as_str(), c)).collect();
        Self { fixture, customers }
    }

    fn customer_summary(&self, id: &str) -> Value {
        let Some(c) = self.customers.get(id) else {
            return Value::Null;
        };
        let orders: Vec<_> = self.fixture.orders.iter().filter(|o| o.customer_id == id).collect();
        let freight: f64 = orders.iter().map(|o| o.freight).sum();
        json!({ "customer_id": c.id, "company_name": c.company_name, "orders": orders.len(), "freight": freight })
    }

    fn full_processing(&self, id: &str) -> Value {
        let mut orders: Vec<_> = self.fixture.orders.iter().filter(|o| o.customer_id == id).collect();
        orders.sort_by(|a, b| b.freight.total_cmp(&a.freight));
        let revenue: f64 = orders
            .iter()
            .flat_map(|o| self.fixture.order_details.iter().filter(move |d| d.order_id == o.id))
            .map(|d| d.unit_price * d.quantity as f64 * (1.0 - d.discount))
            .sum();
        json!({ "customer_id": id, "orders": orders.iter().map(|o| o.id).collect::<Vec<_>>(), "revenue": revenue })
    }
}

/// One routine that parses, counts, hashes, caches, processes and stores.
pub fn handle_god_class(payload: &[u8], state: &ServiceState) -> Result<WorkResponse> {
    let t0 = Instant::now();
    let cfg = &state.config;
    let Some(record) = parse_payload(payload) else {
        let (requests, errors) = {
            let mut g = lock(&state.god_counters);
            g.error_count += 1;
            (g.request_count, g.error_count)
        };
        return Ok(WorkResponse::done(
            t0,
            json!({ "malformed": true, "request_count": requests, "error_count": errors }),
        ));
    };
    lock(&state.god_counters).request_count += 1;

    let mut canonical = serde_json::to_vec(&record).map_err(|e| Error::Handler(e.to_string()))?;
    canonical.resize(canonical.len().max(cfg.payload_size), 0);
    let digest = hash_rounds(&canonical, cfg.iterations.max(1));

    let key = match record.get("customer") {
        Some(k) => k.clone(),
        None => {
            let i = lock(&state.rng).random_range(0..state.fixture.customers.len());
            state.fixture.customers[i].id.clone()
        }
    };
    let session = FixtureSession::open(&state.fixture, cfg.session_open_us);
    let cached = lock(&state.god_counters).cache.get(&key).cloned();
    let cache_hit = cached.is_some();
    let data = match cached {
        Some(v) => v,
        None => {
            let v = session.customer_summary(&key);
            lock(&state.god_counters).cache.insert(key.clone(), v.clone());
            v
        }
    };

    let process = matches!(record.get("process").map(String::as_str), Some("1" | "true" | "yes"));
    if process {
        let session = FixtureSession::open(&state.fixture, cfg.session_open_us);
        let processed = session.full_processing(&key);
        let mut g = lock(&state.god_counters);
        if g.storage.len() < cfg.max_store_items {
            g.storage.push(processed);
        }
    }
    let (requests, errors, stored) = {
        let g = lock(&state.god_counters);
        (g.request_count, g.error_count, g.storage.len())
    };
    Ok(WorkResponse::done(
        t0,
        json!({
            "malformed": false,
            "request_count": requests,
            "error_count": errors,
            "cache_hit": cache_hit,
            "processed": process,
            "stored": stored,
            "digest": hex(&digest[..8]),
            "data": data,
        }),
    ))
}

fn eda_window(f: &RelationalFixture, it: u64) -> &[super::OrderDetail] {
    let len = f.order_details.len();
    let start = (it as usize * 7) % len.saturating_sub(8).max(1);
    &f.order_details[start..(start + 8).min(len)]
}

/// Groups order lines into nested string containers; phase A allocates
/// everything afresh each iteration, phase B reuses its buffers.
pub fn handle_excessive_dynamic_allocation(state: &ServiceState) -> Result<WorkResponse> {
    let t0 = Instant::now();
    let f = &state.fixture;
    let iterations = state.config.iterations;

    let ta = Instant::now();
    let mut checksum_a = 0u64;
    for it in 0..iterations {
        let mut groups: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for d in eda_window(f, it) {
            groups
                .entry(format!("order-{}", d.order_id))
                .or_default()
                .push(format!("{}x{}@{:.2}", d.product_id, d.quantity, d.unit_price));
        }
        checksum_a += groups.len() as u64 + groups.values().flatten().map(|s| s.len() as u64).sum::<u64>();
        std::hint::black_box(&groups);
    }
    let phase_a_ms = ta.elapsed().as_secs_f64() * 1e3;

    let tb = Instant::now();
    let mut checksum_b = 0u64;
    let mut keys: Vec<String> = Vec::new();
    let mut values: Vec<Vec<String>> = Vec::new();
    let mut used: Vec<usize> = Vec::new();
    let mut key = String::new();
    for it in 0..iterations {
        let mut active = 0;
        for d in eda_window(f, it) {
            key.clear();
            let _ = write!(key, "order-{}", d.order_id);
            let g = match keys[..active].iter().position(|k| *k == key) {
                Some(g) => g,
                None => {
                    if active == keys.len() {
                        keys.push(String::new());
                        values.push(Vec::new());
                        used.push(0);
                    }
                    keys[active].clear();
                    keys[active].push_str(&key);
                    used[active] = 0;
                    active += 1;
                    active - 1
                }
            };
            if used[g] == values[g].len() {
                values[g].push(String::new());
            }
            let slot = &mut values[g][used[g]];
            slot.clear();
            let _ = write!(slot, "{}x{}@{:.2}", d.product_id, d.quantity, d.unit_price);
            used[g] += 1;
        }
        checksum_b += active as u64
            + (0..active).map(|g| values[g][..used[g]].iter().map(|s| s.len() as u64).sum::<u64>()).sum::<u64>();
        std::hint::black_box(&values);
    }
    let phase_b_ms = tb.elapsed().as_secs_f64() * 1e3;

    Ok(WorkResponse::done(
        t0,
        json!({
            "iterations": iterations,
            "phase_a_ms": phase_a_ms,
            "phase_b_ms": phase_b_ms,
            "checksum_a": checksum_a,
            "checksum_b": checksum_b,
        }),
    ))
}

/// Counts dependent round trips to the fixture, each paying a fixed latency.
struct Lookups<'a> {
    fixture: &'a RelationalFixture,
    count: usize,
    cost: Duration,
}

impl Lookups<'_> {
    fn hit(&mut self) {
        self.count += 1;
        if !self.cost.is_zero() {
            std::thread::sleep(self.cost);
        }
    }
}

/// customer → recent orders → each order's lines → each line, its product and its supplier,
/// one sequential lookup at a time.
pub fn handle_circuitous_treasure_hunt(customer_id: &str, state: &ServiceState) -> Result<WorkResponse> {
    let t0 = Instant::now();
    let f = &state.fixture;
    let mut q = Lookups { fixture: f, count: 0, cost: Duration::from_micros(state.config.lookup_us) };

    q.hit();
    let Some(customer) = q.fixture.customers.iter().find(|c| c.id == customer_id) else {
        return Ok(WorkResponse::done(t0, json!({ "lookups": q.count, "customer": null, "orders": [] })));
    };

    q.hit();
    let mut recent: Vec<_> = f.orders.iter().filter(|o| o.customer_id == customer.id).collect();
    recent.sort_by(|a, b| b.order_day.cmp(&a.order_day).then(b.id.cmp(&a.id)));
    recent.truncate(state.config.recent_orders);

    let mut orders = Vec::with_capacity(recent.len());
    for o in recent {
        q.hit();
        let detail_ids: Vec<u32> = f.order_details.iter().filter(|d| d.order_id == o.id).map(|d| d.id).collect();
        let mut lines = Vec::with_capacity(detail_ids.len());
        for id in detail_ids {
            q.hit();
            let Some(d) = f.detail(id) else { continue };
            q.hit();
            let Some(p) = f.product(d.product_id) else { continue };
            q.hit();
            let supplier = f.supplier(p.supplier_id).map(|s| s.company_name.as_str());
            lines.push(json!({
                "detail_id": d.id,
                "product": p.name,
                "supplier": supplier,
                "quantity": d.quantity,
            }));
        }
        orders.push(json!({ "order_id": o.id, "order_day": o.order_day, "lines": lines }));
    }
    Ok(WorkResponse::done(
        t0,
        json!({
            "lookups": q.count,
            "customer": { "id": customer.id, "company_name": customer.company_name },
            "orders": orders,
        }),
    ))
}

/// Hashes while holding the single process-wide gate.
pub fn handle_one_lane_bridge(state: &ServiceState) -> Result<WorkResponse> {
    let t0 = Instant::now();
    let seed = random_bytes(state, state.config.payload_size.max(1));
    let gate = &state.bridge_gate;
    let (mut counter, queue_observed) = match gate.lock.try_lock() {
        Ok(g) => (g, false),
        Err(std::sync::TryLockError::WouldBlock) => (lock(&gate.lock), true),
        Err(std::sync::TryLockError::Poisoned(e)) => (e.into_inner(), false),
    };
    let tc = Instant::now();
    let inside = gate.occupancy.fetch_add(1, Ordering::SeqCst) + 1;
    gate.max_occupancy.fetch_max(inside, Ordering::SeqCst);
    let digest = hash_rounds(&seed, state.config.iterations.max(1));
    *counter += 1;
    let crossings = *counter;
    gate.occupancy.fetch_sub(1, Ordering::SeqCst);
    let critical_ms = tc.elapsed().as_secs_f64() * 1e3;
    drop(counter);
    Ok(WorkResponse::done(
        t0,
        json!({
            "queue_observed": queue_observed,
            "crossings": crossings,
            "critical_ms": critical_ms,
            "digest": hex(&digest[..8]),
        }),
    ))
}

/// Heavy windows run the full kernel and leave debt behind; normal windows run
/// a light kernel plus whatever debt they pay off. Debt also decays with time.
pub fn handle_traffic_jam(state: &ServiceState, now_s: f64) -> Result<WorkResponse> {
    let t0 = Instant::now();
    let cfg = &state.config;
    let period = cfg.window_period_s;
    let heavy_len = cfg.heavy_fraction * period;
    let phase_s = now_s.rem_euclid(period);
    let heavy = phase_s < heavy_len;
    let full = cfg.iterations as f64;
    // half-life-ish: backlog mostly drains within the first quarter of the normal window
    let tau = 0.25 * (period - heavy_len);

    let (steps, backlog, debt_after) = {
        let mut jam = lock(&state.jam_clock);
        let dt = (now_s - jam.last_s).max(0.0);
        jam.debt *= (-dt / tau).exp();
        jam.last_s = jam.last_s.max(now_s);
        let backlog = jam.debt > 0.01 * full;
        let steps = if heavy {
            jam.debt = (jam.debt + full).min(50.0 * full);
            full
        } else {
            let pay = jam.debt.min(full);
            jam.debt -= pay;
            full / 20.0 + pay
        };
        (steps, backlog, jam.debt)
    };
    std::hint::black_box(wasted_math(steps as u64));
    Ok(WorkResponse::done(
        t0,
        json!({
            "phase": if heavy { "heavy" } else { "normal" },
            "phase_s": phase_s,
            "backlog": backlog,
            "debt_steps": debt_after,
            "steps": steps as u64,
        }),
    ))
}
