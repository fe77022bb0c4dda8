use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use tokio::time::sleep_until;
use tracing::{debug, info};

use super::{spawn_schedule, LoadPlan, RequestLog, RequestRecord};
use crate::error::{Error, Result};
use crate::clock::epoch_ms;

/// Pause after a transport-level failure so a dead endpoint is not hammered in a tight loop.
const FAILURE_BACKOFF: Duration = Duration::from_millis(50);

struct Shared {
    records: Mutex<Vec<RequestRecord>>,
    in_flight: AtomicUsize,
    max_in_flight: AtomicUsize,
    spawned: AtomicUsize,
    overshoot: AtomicUsize,
}

/// Runs every virtual user as its own task: request, wait, record, think, repeat
/// until the duration has elapsed. Requests still in flight at the deadline
/// are allowed to finish and are recorded.
pub async fn run_load(plan: &LoadPlan) -> Result<RequestLog> {
    let offsets = spawn_schedule(plan)?;
    let client = reqwest::Client::builder()
        .timeout(Duration::from_secs_f64(plan.timeout_s))
        .pool_max_idle_per_host(plan.target_users)
        .build()
        .map_err(|e| Error::Runtime(format!("building HTTP client: {e}")))?;
    let shared = Arc::new(Shared {
        records: Mutex::new(Vec::new()),
        in_flight: AtomicUsize::new(0),
        max_in_flight: AtomicUsize::new(0),
        spawned: AtomicUsize::new(0),
        overshoot: AtomicUsize::new(0),
    });
    let t0 = Instant::now();
    let anchor_ms = epoch_ms();
    let start = tokio::time::Instant::from_std(t0);
    let deadline = t0 + Duration::from_secs_f64(plan.duration_s);
    info!(users = plan.target_users, rate = plan.spawn_rate, duration_s = plan.duration_s, url = %plan.endpoint, "load starting");

    let mut tasks = Vec::with_capacity(offsets.len());
    for (user, off) in offsets.into_iter().enumerate() {
        let client = client.clone();
        let shared = shared.clone();
        let url = plan.endpoint.clone();
        let think = Duration::from_millis(plan.think_time_ms);
        tasks.push(tokio::spawn(async move {
            sleep_until(start + Duration::from_millis(off)).await;
            shared.spawned.fetch_add(1, Ordering::SeqCst);
            let mut mine = Vec::new();
            while Instant::now() < deadline {
                let issued = Instant::now();
                let start_ms = anchor_ms + issued.duration_since(t0).as_millis() as i64;
                let now_in = shared.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
                shared.max_in_flight.fetch_max(now_in, Ordering::SeqCst);
                if now_in > shared.spawned.load(Ordering::SeqCst) {
                    shared.overshoot.fetch_add(1, Ordering::SeqCst);
                }
                let success = match client.get(&url).send().await {
                    Ok(resp) => {
                        let ok = resp.status().is_success();
                        // the reply must be fully read for the round trip to count
                        resp.bytes().await.is_ok() && ok
                    }
                    Err(e) => {
                        debug!(user, error = %e, "request failed");
                        false
                    }
                };
                let rt = issued.elapsed().as_secs_f64() * 1e3;
                shared.in_flight.fetch_sub(1, Ordering::SeqCst);
                mine.push(RequestRecord { start_ms, response_time_ms: rt, success, user_id: user });
                if !success {
                    tokio::time::sleep(think.max(FAILURE_BACKOFF)).await;
                } else if !think.is_zero() {
                    tokio::time::sleep(think).await;
                }
            }
            shared.records.lock().unwrap_or_else(|e| e.into_inner()).extend(mine);
        }));
    }
    for t in tasks {
        t.await.map_err(|e| Error::Runtime(format!("virtual user task failed: {e}")))?;
    }
    let ended = anchor_ms + t0.elapsed().as_millis() as i64;
    let shared = Arc::try_unwrap(shared).map_err(|_| Error::Runtime("virtual users still running".into()))?;
    if shared.overshoot.load(Ordering::SeqCst) > 0 {
        return Err(Error::Runtime("more requests in flight than spawned users".into()));
    }
    let mut records = shared.records.into_inner().unwrap_or_else(|e| e.into_inner());
    records.sort_by(|a, b| a.start_ms.cmp(&b.start_ms).then(a.user_id.cmp(&b.user_id)));
    let log = RequestLog {
        plan: plan.clone(),
        records,
        started_epoch_ms: anchor_ms,
        ended_epoch_ms: ended,
        max_in_flight: shared.max_in_flight.load(Ordering::SeqCst),
    };
    info!(requests = log.records.len(), failures = log.failure_count(), "load finished");
    Ok(log)
}
