use std::time::Instant;

use apbench::workload::{serve, AntipatternKind, WorkloadConfig};

async fn start(kind: AntipatternKind, tweak: impl FnOnce(&mut WorkloadConfig)) -> apbench::workload::ServiceHandle {
    let mut c = WorkloadConfig::new(kind);
    tweak(&mut c);
    serve(c, "127.0.0.1:0").await.unwrap()
}

#[tokio::test(flavor = "multi_thread")]
async fn health_and_routing() {
    let svc = start(AntipatternKind::SisyphusRetrieval, |_| {}).await;
    let base = format!("http://{}", svc.addr);
    let health = reqwest::get(format!("{base}/healthz")).await.unwrap();
    assert_eq!(health.text().await.unwrap(), "ok");
    let other = reqwest::get(format!("{base}/the-ramp")).await.unwrap();
    assert_eq!(other.status(), 404);
    let bad = reqwest::get(format!("{base}/sisyphus-retrieval?page=abc")).await.unwrap();
    assert_eq!(bad.status(), 400);
    let ok: serde_json::Value = reqwest::get(format!("{base}/sisyphus-retrieval?page=3")).await.unwrap().json().await.unwrap();
    assert_eq!(ok["status"], "success");
    assert_eq!(ok["body_summary"]["scanned_count"], svc.state.fixture.orders.len());
    svc.shutdown().await.unwrap();
}

#[tokio::test(flavor = "multi_thread")]
async fn god_class_counters_are_exact_under_concurrency() {
    let svc = start(AntipatternKind::GodClass, |c| {
        c.iterations = 2_000;
        c.session_open_us = 0;
    })
    .await;
    let url = svc.url();
    let client = reqwest::Client::new();
    let tasks: Vec<_> = (0..1000)
        .map(|i| {
            let (client, url) = (client.clone(), url.clone());
            tokio::spawn(async move {
                let body = if i % 4 == 0 { "{broken".to_string() } else { format!("{{\"customer\":\"c{i}\"}}") };
                client.post(&url).body(body).send().await.unwrap().status().as_u16()
            })
        })
        .collect();
    for t in tasks {
        assert_eq!(t.await.unwrap(), 200);
    }
    // malformed payloads are absorbed as errors, everything else is a counted request
    let (requests, errors) = svc.state.god_totals();
    assert_eq!((requests, errors), (750, 250));
    assert_eq!(requests + errors, 1000);
    svc.shutdown().await.unwrap();
}

#[tokio::test(flavor = "multi_thread")]
async fn one_lane_bridge_serialises_crossings() {
    let svc = start(AntipatternKind::OneLaneBridge, |_| {}).await;
    let url = svc.url();
    let single: serde_json::Value = reqwest::get(&url).await.unwrap().json().await.unwrap();
    let critical = single["body_summary"]["critical_ms"].as_f64().unwrap();

    let client = reqwest::Client::new();
    let t0 = Instant::now();
    let tasks: Vec<_> = (0..8)
        .map(|_| {
            let (client, url) = (client.clone(), url.clone());
            tokio::spawn(async move { client.get(&url).send().await.unwrap().status().as_u16() })
        })
        .collect();
    for t in tasks {
        assert_eq!(t.await.unwrap(), 200);
    }
    let makespan = t0.elapsed().as_secs_f64() * 1e3;
    assert!(makespan >= 6.0 * critical, "makespan {makespan:.1} ms vs critical {critical:.1} ms");
    assert_eq!(svc.state.bridge_gate.crossings(), 9);
    assert_eq!(svc.state.bridge_gate.max_occupancy(), 1);
    svc.shutdown().await.unwrap();
}

#[tokio::test(flavor = "multi_thread")]
async fn ramp_store_grows_with_each_request() {
    let svc = start(AntipatternKind::TheRamp, |_| {}).await;
    let client = reqwest::Client::new();
    for expected in 1..=50u64 {
        let r: serde_json::Value = client.get(svc.url()).send().await.unwrap().json().await.unwrap();
        assert_eq!(r["body_summary"]["store_size"], expected);
    }
    assert_eq!(svc.state.ramp_len(), 50);
    svc.shutdown().await.unwrap();
}
