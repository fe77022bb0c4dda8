use std::sync::Arc;
use std::time::Instant;

use tracing::info;

use super::fixture::generate_fixture;
use super::handlers::{dispatch, RequestParams};
use super::kernels::wasted_math;
use super::state::ServiceState;
use super::{AntipatternKind, WorkloadConfig};
use crate::error::{Error, Result};

/// Endpoints whose cost is driven by `iterations`.
pub(crate) fn iteration_driven(kind: AntipatternKind) -> bool {
    !matches!(
        kind,
        AntipatternKind::TheRamp | AntipatternKind::SisyphusRetrieval | AntipatternKind::CircuitousTreasureHunt
    )
}

/// Rescales `iterations` so a single unloaded request takes about `target_ms`.
///
/// Probes with an eighth of the configured work on throwaway state and assumes
/// cost is linear in iterations. Endpoints not driven by iterations are
/// returned unchanged.
pub fn calibrate(config: &WorkloadConfig, target_ms: f64) -> Result<WorkloadConfig> {
    if !(target_ms > 0.0 && target_ms.is_finite()) {
        return Err(Error::Usage(format!("calibration target must be positive, got {target_ms}")));
    }
    let mut out = config.clone();
    if !iteration_driven(config.kind) {
        return Ok(out);
    }
    let fixture = Arc::new(generate_fixture(config.dataset_seed, config.dataset_scale));
    let mut probe = config.clone();
    probe.iterations = (config.iterations / 8).max(1_000);
    let fixed_ms = match config.kind {
        AntipatternKind::GodClass => config.session_open_us as f64 / 1e3,
        _ => 0.0,
    };
    let mut times = Vec::with_capacity(3);
    for _ in 0..3 {
        let t0 = Instant::now();
        if config.kind == AntipatternKind::TrafficJam {
            // the heavy kernel is what gets calibrated
            std::hint::black_box(wasted_math(probe.iterations));
        } else {
            let state = ServiceState::with_fixture(probe.clone(), fixture.clone());
            dispatch(&state, &RequestParams::default(), 0.0)?;
        }
        times.push(t0.elapsed().as_secs_f64() * 1e3);
    }
    times.sort_by(f64::total_cmp);
    let per_iter = ((times[1] - fixed_ms).max(1e-6)) / probe.iterations as f64;
    out.iterations = (((target_ms - fixed_ms).max(0.0)) / per_iter).round().max(1.0) as u64;
    info!(kind = %config.kind, from = config.iterations, to = out.iterations, target_ms, "calibrated iterations");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::handle_unnecessary_processing;

    #[test]
    fn non_iterative_kinds_untouched() {
        let c = WorkloadConfig::new(AntipatternKind::TheRamp);
        assert_eq!(calibrate(&c, 100.0).unwrap(), c);
        assert!(calibrate(&c, 0.0).is_err());
    }

    #[test]
    fn hits_target_roughly() {
        let c = WorkloadConfig::new(AntipatternKind::UnnecessaryProcessing);
        let tuned = calibrate(&c, 20.0).unwrap();
        let state = ServiceState::new(tuned);
        let mut t: Vec<f64> =
            (0..5).map(|_| handle_unnecessary_processing(&state).unwrap().server_elapsed_ms).collect();
        t.sort_by(f64::total_cmp);
        assert!(t[2] > 8.0 && t[2] < 50.0, "median {} ms", t[2]);
    }
}
