use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::{RawQuery, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::sync::{oneshot, Semaphore};
use tokio::task::JoinHandle;
use tracing::{info, warn};

use super::handlers::{dispatch, RequestParams, WorkResponse};
use super::state::ServiceState;
use super::WorkloadConfig;
use crate::clock::epoch_ms;
use crate::error::{Error, Result};

/// Startup record a service prints (and the orchestrator stores) so a run can be replayed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceMeta {
    pub addr: String,
    pub pid: u32,
    pub config: WorkloadConfig,
    pub fixture_digest: String,
    pub pool_size: usize,
    pub started_epoch_ms: u64,
}

#[derive(Clone)]
struct App {
    state: Arc<ServiceState>,
    pool: Arc<Semaphore>,
}

pub fn default_pool_size() -> usize {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    (4 * cores).max(8)
}

async fn endpoint(State(app): State<App>, RawQuery(query): RawQuery, body: Bytes) -> Response {
    let t0 = Instant::now();
    let Ok(permit) = app.pool.clone().acquire_owned().await else {
        return (StatusCode::SERVICE_UNAVAILABLE, "shutting down").into_response();
    };
    let state = app.state.clone();
    let params = RequestParams { raw_query: query.unwrap_or_default(), body: body.to_vec() };
    let outcome = tokio::task::spawn_blocking(move || {
        let _permit = permit;
        let now = state.uptime_s();
        dispatch(&state, &params, now)
    })
    .await;
    let elapsed = t0.elapsed().as_secs_f64() * 1e3;
    match outcome {
        Ok(Ok(r)) => (StatusCode::OK, Json(r)).into_response(),
        Ok(Err(e @ Error::Usage(_))) => {
            (StatusCode::BAD_REQUEST, Json(WorkResponse::failure(&e.to_string(), elapsed))).into_response()
        }
        Ok(Err(e)) => {
            warn!(error = %e, "handler failed");
            (StatusCode::INTERNAL_SERVER_ERROR, Json(WorkResponse::failure(&e.to_string(), elapsed))).into_response()
        }
        Err(e) => {
            warn!(error = %e, "handler panicked");
            (StatusCode::INTERNAL_SERVER_ERROR, Json(WorkResponse::failure("handler panicked", elapsed)))
                .into_response()
        }
    }
}

/// `/healthz` plus the one endpoint of the configured antipattern; anything else is 404.
pub fn router(state: Arc<ServiceState>, pool_size: usize) -> Router {
    let path = format!("/{}", state.config.kind.slug());
    let app = App { state, pool: Arc::new(Semaphore::new(pool_size.max(1))) };
    Router::new()
        .route("/healthz", get(|| async { "ok" }))
        .route(&path, get(endpoint).post(endpoint))
        .with_state(app)
}

pub struct ServiceHandle {
    pub addr: SocketAddr,
    pub meta: ServiceMeta,
    pub state: Arc<ServiceState>,
    shutdown: Option<oneshot::Sender<()>>,
    task: JoinHandle<std::io::Result<()>>,
}

impl ServiceHandle {
    pub fn url(&self) -> String {
        format!("http://{}/{}", self.addr, self.meta.config.kind.slug())
    }

    /// Stops accepting connections and waits for in-flight requests.
    pub async fn shutdown(mut self) -> Result<()> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        self.join().await
    }

    /// Runs until the server stops by itself.
    pub async fn join(self) -> Result<()> {
        match self.task.await {
            Ok(r) => r.map_err(|e| Error::io("http server", e)),
            Err(e) => Err(Error::Runtime(format!("server task failed: {e}"))),
        }
    }

    /// Shuts down on SIGINT or SIGTERM.
    pub async fn run_until_signal(self) -> Result<()> {
        let ctrl_c = tokio::signal::ctrl_c();
        #[cfg(unix)]
        {
            use tokio::signal::unix::{signal, SignalKind};
            let mut term = signal(SignalKind::terminate()).map_err(|e| Error::io("installing SIGTERM handler", e))?;
            tokio::select! {
                _ = ctrl_c => {}
                _ = term.recv() => {}
            }
        }
        #[cfg(not(unix))]
        let _ = ctrl_c.await;
        info!("shutting down");
        self.shutdown().await
    }
}

/// Binds `bind` (port 0 picks a free port) and starts serving in the background.
pub async fn serve(config: WorkloadConfig, bind: &str) -> Result<ServiceHandle> {
    config.validate()?;
    let listener = tokio::net::TcpListener::bind(bind)
        .await
        .map_err(|source| Error::Bind { addr: bind.to_string(), source })?;
    let addr = listener.local_addr().map_err(|e| Error::io("reading bound address", e))?;
    let state = Arc::new(ServiceState::new(config));
    let pool_size = default_pool_size();
    let meta = ServiceMeta {
        addr: addr.to_string(),
        pid: std::process::id(),
        config: state.config.clone(),
        fixture_digest: state.fixture.digest(),
        pool_size,
        started_epoch_ms: epoch_ms() as u64,
    };
    let (tx, rx) = oneshot::channel::<()>();
    let app = router(state.clone(), pool_size);
    let task = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async move {
                let _ = rx.await;
            })
            .await
    });
    info!(%addr, kind = %state.config.kind, "service listening");
    Ok(ServiceHandle { addr, meta, state, shutdown: Some(tx), task })
}

/// Restricts the calling thread (and every thread it later spawns) to one core.
pub fn pin_to_core(core: usize) -> std::result::Result<(), String> {
    #[cfg(target_os = "linux")]
    unsafe {
        let mut set: libc::cpu_set_t = std::mem::zeroed();
        libc::CPU_ZERO(&mut set);
        libc::CPU_SET(core, &mut set);
        if libc::sched_setaffinity(0, std::mem::size_of::<libc::cpu_set_t>(), &set) != 0 {
            return Err(std::io::Error::last_os_error().to_string());
        }
        Ok(())
    }
    #[cfg(not(target_os = "linux"))]
    {
        let _ = core;
        Err("CPU affinity is only supported on Linux".into())
    }
}

/// Caps the address space of this process.
pub fn limit_memory(megabytes: u64) -> std::result::Result<(), String> {
    #[cfg(unix)]
    unsafe {
        let bytes = megabytes.saturating_mul(1 << 20) as libc::rlim_t;
        let lim = libc::rlimit { rlim_cur: bytes, rlim_max: bytes };
        if libc::setrlimit(libc::RLIMIT_AS, &lim) != 0 {
            return Err(std::io::Error::last_os_error().to_string());
        }
        Ok(())
    }
    #[cfg(not(unix))]
    {
        let _ = megabytes;
        Err("memory limits are only supported on Unix".into())
    }
}
