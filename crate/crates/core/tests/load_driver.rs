use std::time::Duration;

use apbench::load::{bin_throughput, run_load, spawn_schedule, LoadPlan};
use axum::routing::get;
use axum::Router;

async fn stub(delay_ms: u64) -> String {
    let app = Router::new()
        .route("/healthz", get(|| async { "ok" }))
        .route(
            "/slow",
            get(move || async move {
                tokio::time::sleep(Duration::from_millis(delay_ms)).await;
                "done"
            }),
        );
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    format!("http://{addr}")
}

#[tokio::test(flavor = "multi_thread")]
async fn healthz_smoke() {
    let base = stub(0).await;
    let log = run_load(&LoadPlan::new(format!("{base}/healthz"), 3, 1.0)).await.unwrap();
    assert!(!log.records.is_empty());
    assert_eq!(log.failure_count(), 0);
    assert!(log.max_in_flight <= 3);
}

#[tokio::test(flavor = "multi_thread")]
async fn unreachable_endpoint_records_only_failures() {
    let addr = {
        let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap()
    };
    let log = run_load(&LoadPlan::new(format!("http://{addr}/x"), 2, 1.0)).await.unwrap();
    assert!(!log.records.is_empty());
    assert_eq!(log.failure_count(), log.records.len());
}

#[tokio::test(flavor = "multi_thread")]
async fn closed_loop_request_count_follows_service_time() {
    let base = stub(100).await;
    let log = run_load(&LoadPlan::new(format!("{base}/slow"), 2, 5.0)).await.unwrap();
    // user 0 runs 5.0 s, user 1 starts 0.1 s later; each round trip takes a bit over 100 ms
    let n = log.records.len();
    assert!((85..=101).contains(&n), "{n} records");
    assert!(log.records.iter().all(|r| r.success && r.response_time_ms >= 100.0));
    assert_eq!(log.max_in_flight, 2);
    let total: u64 = bin_throughput(&log.records, 1).iter().map(|(_, c)| c).sum();
    assert_eq!(total as usize, n);
}

#[tokio::test(flavor = "multi_thread")]
async fn users_start_on_schedule() {
    let base = stub(20).await;
    let mut plan = LoadPlan::new(format!("{base}/slow"), 20, 3.0);
    plan.spawn_rate = 10.0;
    let offsets = spawn_schedule(&plan).unwrap();
    let log = run_load(&plan).await.unwrap();
    for (user, off) in offsets.iter().enumerate() {
        let first = log.records.iter().filter(|r| r.user_id == user).map(|r| r.start_ms).min().unwrap();
        let actual = first - log.started_epoch_ms;
        assert!((actual - *off as i64).abs() < 100, "user {user}: planned {off} ms, started {actual} ms");
    }
}

#[test]
fn ramp_up_must_fit_in_the_run() {
    assert!(LoadPlan::new("http://x", 100, 5.0).validate().is_err());
    assert!(LoadPlan::new("http://x", 0, 5.0).validate().is_err());
}
