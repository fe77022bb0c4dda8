use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{PowerSample, ResourceSample};
use crate::error::{Error, Result};

/// Linear power model used when no energy counters are available.
///
/// cpu = base + cpu_coeff·util + rt_coeff·rt + N(0, noise_sd), clamped at 0;
/// dram = dram_base + dram_per_gib·memory + N(0, dram_noise_sd), clamped at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimPowerModel {
    pub base_w: f64,
    pub cpu_coeff_w: f64,
    /// Watts per millisecond of binned mean response time.
    pub rt_coeff: f64,
    pub noise_sd_w: f64,
    pub seed: u64,
    pub dram_base_w: f64,
    pub dram_per_gib_w: f64,
    pub dram_noise_sd_w: f64,
}

impl Default for SimPowerModel {
    fn default() -> Self {
        Self {
            base_w: 5.0,
            cpu_coeff_w: 60.0,
            rt_coeff: 0.002,
            noise_sd_w: 0.5,
            seed: 1,
            dram_base_w: 0.8,
            dram_per_gib_w: 0.5,
            dram_noise_sd_w: 0.05,
        }
    }
}

impl SimPowerModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.base_w > 0.0) {
            return Err(Error::Usage(format!("simulated base power must be positive, got {}", self.base_w)));
        }
        if !(self.noise_sd_w >= 0.0 && self.dram_noise_sd_w >= 0.0) {
            return Err(Error::Usage("simulated noise must be non-negative".into()));
        }
        let all = [self.cpu_coeff_w, self.rt_coeff, self.dram_base_w, self.dram_per_gib_w];
        if all.iter().chain([self.base_w, self.noise_sd_w].iter()).any(|v| !v.is_finite()) {
            return Err(Error::Usage("simulated power parameters must be finite".into()));
        }
        Ok(())
    }
}

fn noise(sd: f64, rng: &mut ChaCha8Rng) -> f64 {
    if sd == 0.0 {
        0.0
    } else {
        Normal::new(0.0, sd).map_or(0.0, |n| n.sample(rng))
    }
}

/// Power for one second. The noise stream is keyed by (seed, t), so the same
/// inputs give the same sample regardless of call order.
pub fn simulate_power(model: &SimPowerModel, resource: &ResourceSample, rt_ms: f64) -> PowerSample {
    let key = model.seed ^ (resource.t_s as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    let cpu = model.base_w + model.cpu_coeff_w * resource.cpu_util + model.rt_coeff * rt_ms
        + noise(model.noise_sd_w, &mut rng);
    let gib = resource.memory_bytes.unwrap_or(0) as f64 / (1u64 << 30) as f64;
    let dram = model.dram_base_w + model.dram_per_gib_w * gib + noise(model.dram_noise_sd_w, &mut rng);
    PowerSample { t_s: resource.t_s, cpu_power_w: cpu.max(0.0), dram_power_w: Some(dram.max(0.0)) }
}

/// One power sample per resource sample; seconds without a mean response time contribute rt = 0.
pub fn simulate_power_trace(
    model: &SimPowerModel,
    resources: &[ResourceSample],
    rt_by_second: &BTreeMap<i64, f64>,
) -> Vec<PowerSample> {
    resources
        .iter()
        .map(|r| simulate_power(model, r, rt_by_second.get(&r.t_s).copied().unwrap_or(0.0)))
        .collect()
}
