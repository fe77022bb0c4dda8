use std::io::Write;
use std::time::{Duration, Instant};

use apbench::telemetry::{spawn_sampler, ProcFs, ProcResources, ProcessCpuMeter, ResourceSource, SamplerConfig};

#[test]
fn spinning_thread_shows_up_as_one_core() {
    let fs = ProcFs::system();
    let cores = fs.host_cores().unwrap();
    let mut meter = ProcessCpuMeter::new(fs, std::process::id()).unwrap();
    meter.sample().unwrap();
    let t0 = Instant::now();
    let mut x = 0u64;
    while t0.elapsed() < Duration::from_millis(1500) {
        x = std::hint::black_box(x.wrapping_mul(6364136223846793005).wrapping_add(1));
    }
    let util = meter.sample().unwrap();
    let one_core = 1.0 / cores as f64;
    assert!(util >= 0.7 * one_core && util <= 1.0, "util {util} with {cores} cores");
}

#[test]
fn written_bytes_are_counted() {
    let mut res = ProcResources::new(ProcFs::system(), Some(std::process::id())).unwrap();
    res.prime().unwrap();
    let before = res.sample().unwrap().resource.disk_write_bytes.expect("process io accounting");
    let dir = tempfile::tempdir_in(env!("CARGO_TARGET_TMPDIR")).unwrap();
    let mut f = std::fs::File::create(dir.path().join("blob")).unwrap();
    f.write_all(&vec![7u8; 10 << 20]).unwrap();
    f.sync_all().unwrap();
    let after = res.sample().unwrap().resource.disk_write_bytes.unwrap();
    assert!(after - before >= 10 << 20, "delta {}", after - before);
}

#[test]
fn sampler_emits_one_sample_per_second() {
    let res = ProcResources::new(ProcFs::system(), None).unwrap();
    let handle = spawn_sampler(SamplerConfig::default(), Box::new(res), None).unwrap();
    std::thread::sleep(Duration::from_secs(11));
    let stream = handle.stop();
    assert!(stream.error.is_none(), "{:?}", stream.error);
    let n = stream.resources.len();
    assert!((9..=11).contains(&n), "{n} samples");
    assert!(stream.resources.windows(2).all(|w| w[1].t_s > w[0].t_s));
    assert!(stream.gaps_ms.iter().skip(1).all(|g| (800.0..1200.0).contains(g)), "{:?}", stream.gaps_ms);
    assert!(stream.power.is_empty());
}

#[test]
fn vanished_target_ends_the_stream_with_an_error() {
    let mut child = std::process::Command::new("sleep").arg("30").spawn().unwrap();
    let res = ProcResources::new(ProcFs::system(), Some(child.id())).unwrap();
    let handle = spawn_sampler(SamplerConfig::default(), Box::new(res), None).unwrap();
    std::thread::sleep(Duration::from_millis(2500));
    child.kill().unwrap();
    child.wait().unwrap();
    let t0 = Instant::now();
    while !handle.is_finished() && t0.elapsed() < Duration::from_secs(5) {
        std::thread::sleep(Duration::from_millis(50));
    }
    let stream = handle.stop();
    assert!(stream.error.as_deref().is_some_and(|e| e.contains("exited")), "{:?}", stream.error);
}
