//! The ten antipattern endpoints, their configuration and shared state.

mod calibrate;
mod fixture;
mod handlers;
mod kernels;
mod server;
mod state;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use calibrate::calibrate;
pub use fixture::{
    generate_fixture, Customer, Order, OrderDetail, Product, RelationalFixture, Supplier,
    BASE_CUSTOMERS, BASE_ORDERS, BASE_ORDER_DETAILS, BASE_PRODUCTS, BASE_SUPPLIERS,
};
pub use handlers::{
    dispatch, handle_circuitous_treasure_hunt, handle_excessive_dynamic_allocation,
    handle_god_class, handle_more_is_less, handle_one_lane_bridge, handle_sisyphus_retrieval,
    handle_the_ramp, handle_traffic_jam, handle_unbalanced_processing,
    handle_unnecessary_processing, RequestParams, Status, WorkResponse,
};
pub use server::{limit_memory, pin_to_core, router, serve, ServiceHandle, ServiceMeta};
pub use state::{BridgeGate, GodCounters, JamClock, RampItem, ServiceState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum AntipatternKind {
    UnbalancedProcessing,
    UnnecessaryProcessing,
    TheRamp,
    SisyphusRetrieval,
    MoreIsLess,
    GodClass,
    ExcessiveDynamicAllocation,
    CircuitousTreasureHunt,
    OneLaneBridge,
    TrafficJam,
}

impl AntipatternKind {
    pub const ALL: [AntipatternKind; 10] = [
        AntipatternKind::UnbalancedProcessing,
        AntipatternKind::UnnecessaryProcessing,
        AntipatternKind::TheRamp,
        AntipatternKind::SisyphusRetrieval,
        AntipatternKind::MoreIsLess,
        AntipatternKind::GodClass,
        AntipatternKind::ExcessiveDynamicAllocation,
        AntipatternKind::CircuitousTreasureHunt,
        AntipatternKind::OneLaneBridge,
        AntipatternKind::TrafficJam,
    ];

    /// URL path segment, also the CLI spelling.
    pub fn slug(self) -> &'static str {
        match self {
            AntipatternKind::UnbalancedProcessing => "unbalanced-processing",
            AntipatternKind::UnnecessaryProcessing => "unnecessary-processing",
            AntipatternKind::TheRamp => "the-ramp",
            AntipatternKind::SisyphusRetrieval => "sisyphus-retrieval",
            AntipatternKind::MoreIsLess => "more-is-less",
            AntipatternKind::GodClass => "god-class",
            AntipatternKind::ExcessiveDynamicAllocation => "excessive-dynamic-allocation",
            AntipatternKind::CircuitousTreasureHunt => "circuitous-treasure-hunt",
            AntipatternKind::OneLaneBridge => "one-lane-bridge",
            AntipatternKind::TrafficJam => "traffic-jam",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AntipatternKind::UnbalancedProcessing => "Unbalanced Processing",
            AntipatternKind::UnnecessaryProcessing => "Unnecessary Processing",
            AntipatternKind::TheRamp => "The Ramp",
            AntipatternKind::SisyphusRetrieval => "Sisyphus Database Retrieval",
            AntipatternKind::MoreIsLess => "More Is Less",
            AntipatternKind::GodClass => "God Class",
            AntipatternKind::ExcessiveDynamicAllocation => "Excessive Dynamic Allocation",
            AntipatternKind::CircuitousTreasureHunt => "Circuitous Treasure Hunt",
            AntipatternKind::OneLaneBridge => "One-Lane Bridge",
            AntipatternKind::TrafficJam => "Traffic Jam",
        }
    }

    /// Concurrent virtual users used when the caller does not choose.
    pub fn default_users(self) -> usize {
        match self {
            AntipatternKind::UnbalancedProcessing => 10,
            AntipatternKind::UnnecessaryProcessing | AntipatternKind::TrafficJam => 30,
            _ => 50,
        }
    }

    pub fn slugs() -> Vec<&'static str> {
        Self::ALL.iter().map(|k| k.slug()).collect()
    }
}

impl fmt::Display for AntipatternKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for AntipatternKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|k| k.slug() == s).ok_or_else(|| {
            Error::Usage(format!(
                "unknown antipattern `{s}`; expected one of: {}",
                Self::slugs().join(", ")
            ))
        })
    }
}

impl From<AntipatternKind> for String {
    fn from(k: AntipatternKind) -> String {
        k.slug().to_string()
    }
}

impl TryFrom<String> for AntipatternKind {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Tuning knobs for one antipattern service.
///
/// `iterations` means something different per endpoint: pipeline rounds for
/// Unbalanced Processing, loop steps for Unnecessary Processing and the Traffic
/// Jam heavy kernel, work units for More Is Less, hash rounds for God Class and
/// One-Lane Bridge, and container-building iterations for Excessive Dynamic
/// Allocation. The Ramp, Sisyphus and Circuitous Treasure Hunt ignore it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadConfig {
    pub kind: AntipatternKind,
    pub iterations: u64,
    pub payload_size: usize,
    pub worker_count: usize,
    pub window_period_s: f64,
    pub heavy_fraction: f64,
    pub dataset_seed: u64,
    pub dataset_scale: u32,
    /// Seed of the per-service generator behind every random choice a handler makes.
    pub rng_seed: u64,
    pub recent_orders: usize,
    pub page_size: usize,
    pub max_store_items: usize,
    /// Fixed cost of opening a fixture session (God Class).
    pub session_open_us: u64,
    /// Round-trip cost of one dependent lookup (Circuitous Treasure Hunt).
    pub lookup_us: u64,
}

impl WorkloadConfig {
    pub fn new(kind: AntipatternKind) -> Self {
        let (iterations, payload_size) = match kind {
            AntipatternKind::UnbalancedProcessing => (1_000, 4096),
            AntipatternKind::UnnecessaryProcessing => (1_500_000, 0),
            AntipatternKind::TheRamp => (1, 256),
            AntipatternKind::SisyphusRetrieval => (1, 0),
            AntipatternKind::MoreIsLess => (16_000_000, 0),
            AntipatternKind::GodClass => (300_000, 512),
            AntipatternKind::ExcessiveDynamicAllocation => (20_000, 0),
            AntipatternKind::CircuitousTreasureHunt => (1, 0),
            AntipatternKind::OneLaneBridge => (500_000, 64),
            AntipatternKind::TrafficJam => (1_000_000, 0),
        };
        Self {
            kind,
            iterations,
            payload_size,
            worker_count: 64,
            window_period_s: 60.0,
            heavy_fraction: 0.25,
            dataset_seed: 1,
            dataset_scale: 1,
            rng_seed: 1,
            recent_orders: 5,
            page_size: 20,
            max_store_items: 10_000_000,
            session_open_us: 2_000,
            lookup_us: 1_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Usage(m.to_string()));
        if self.worker_count == 0 {
            return bad("worker_count must be at least 1");
        }
        if self.dataset_scale == 0 {
            return bad("dataset_scale must be at least 1");
        }
        if self.page_size == 0 || self.recent_orders == 0 || self.max_store_items == 0 {
            return bad("page_size, recent_orders and max_store_items must be at least 1");
        }
        if !(self.heavy_fraction > 0.0 && self.heavy_fraction < 1.0) {
            return bad("heavy_fraction must lie strictly between 0 and 1");
        }
        if !(self.window_period_s > 0.0 && self.window_period_s.is_finite()) {
            return bad("window_period_s must be positive");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slugs_round_trip() {
        for k in AntipatternKind::ALL {
            assert_eq!(k.slug().parse::<AntipatternKind>().unwrap(), k);
        }
        let distinct: std::collections::HashSet<_> = AntipatternKind::slugs().into_iter().collect();
        assert_eq!(distinct.len(), 10);
    }

    #[test]
    fn unknown_slug_lists_choices() {
        let err = "the-slope".parse::<AntipatternKind>().unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("the-ramp") && msg.contains("traffic-jam"));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn default_user_counts() {
        let users: Vec<usize> = AntipatternKind::ALL.iter().map(|k| k.default_users()).collect();
        assert_eq!(users, vec![10, 30, 50, 50, 50, 50, 50, 50, 50, 30]);
    }

    #[test]
    fn config_validation() {
        let mut c = WorkloadConfig::new(AntipatternKind::TrafficJam);
        assert!(c.validate().is_ok());
        c.heavy_fraction = 1.0;
        assert!(c.validate().is_err());
        let mut c = WorkloadConfig::new(AntipatternKind::MoreIsLess);
        c.worker_count = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn serde_uses_slugs() {
        let c = WorkloadConfig::new(AntipatternKind::OneLaneBridge);
        let s = serde_json::to_string(&c).unwrap();
        assert!(s.contains("\"one-lane-bridge\""));
        let back: WorkloadConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
    }
}
