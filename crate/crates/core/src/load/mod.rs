//! Closed-loop virtual-user load generation and per-second binning.

mod bins;
mod driver;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bins::{bin_requests, bin_response_time, bin_throughput, RequestBin};
pub use driver::run_load;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadPlan {
    pub target_users: usize,
    /// Users started per second.
    pub spawn_rate: f64,
    pub duration_s: f64,
    pub endpoint: String,
    pub think_time_ms: u64,
    pub timeout_s: f64,
}

impl LoadPlan {
    pub fn new(endpoint: impl Into<String>, target_users: usize, duration_s: f64) -> Self {
        Self {
            target_users,
            spawn_rate: 10.0,
            duration_s,
            endpoint: endpoint.into(),
            think_time_ms: 0,
            timeout_s: 60.0,
        }
    }

    pub fn ramp_up_s(&self) -> f64 {
        self.target_users as f64 / self.spawn_rate
    }

    pub fn validate(&self) -> Result<()> {
        if self.target_users == 0 {
            return Err(Error::Usage("at least one user is required".into()));
        }
        if !(self.spawn_rate > 0.0 && self.spawn_rate.is_finite()) {
            return Err(Error::Usage(format!("spawn rate must be positive, got {}", self.spawn_rate)));
        }
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(Error::Usage(format!("duration must be positive, got {}", self.duration_s)));
        }
        if self.ramp_up_s() >= self.duration_s {
            return Err(Error::Usage(format!(
                "ramp-up of {} users at {}/s takes {:.1} s, which does not fit in {} s",
                self.target_users,
                self.spawn_rate,
                self.ramp_up_s(),
                self.duration_s
            )));
        }
        if !(self.timeout_s > 0.0) {
            return Err(Error::Usage("request timeout must be positive".into()));
        }
        Ok(())
    }
}

/// Start offset of every user in milliseconds: user i starts at i / spawn_rate seconds,
/// so it begins within second ⌊i / spawn_rate⌋.
pub fn spawn_schedule(plan: &LoadPlan) -> Result<Vec<u64>> {
    plan.validate()?;
    Ok((0..plan.target_users).map(|i| (i as f64 * 1000.0 / plan.spawn_rate).floor() as u64).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RequestRecord {
    /// Wall-clock start, epoch milliseconds.
    pub start_ms: i64,
    pub response_time_ms: f64,
    pub success: bool,
    pub user_id: usize,
}

impl RequestRecord {
    pub fn completion_ms(&self) -> f64 {
        self.start_ms as f64 + self.response_time_ms
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestLog {
    pub plan: LoadPlan,
    /// Sorted by start time.
    pub records: Vec<RequestRecord>,
    pub started_epoch_ms: i64,
    pub ended_epoch_ms: i64,
    /// Largest number of requests observed in flight at once.
    pub max_in_flight: usize,
}

impl RequestLog {
    pub fn failure_count(&self) -> usize {
        self.records.iter().filter(|r| !r.success).count()
    }
}

pub fn write_requests_csv(path: &Path, records: &[RequestRecord]) -> Result<()> {
    crate::csvio::write_csv(path, records)
}

pub fn read_requests_csv(path: &Path) -> Result<Vec<RequestRecord>> {
    crate::csvio::read_csv(path, "request log")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan(users: usize) -> LoadPlan {
        LoadPlan::new("http://127.0.0.1:1/x", users, 60.0)
    }

    #[test]
    fn fifty_users_at_ten_per_second() {
        let s = spawn_schedule(&plan(50)).unwrap();
        assert_eq!(s.len(), 50);
        assert_eq!(*s.last().unwrap(), 4900);
        assert!(s.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn single_user_starts_immediately() {
        assert_eq!(spawn_schedule(&plan(1)).unwrap(), vec![0]);
    }

    #[test]
    fn thirty_users_fill_three_seconds() {
        let s = spawn_schedule(&plan(30)).unwrap();
        for (i, off) in s.iter().enumerate() {
            assert_eq!(*off / 1000, (i / 10) as u64);
        }
    }

    #[test]
    fn invalid_plans() {
        let mut p = plan(0);
        assert!(spawn_schedule(&p).is_err());
        p.target_users = 600;
        assert!(p.validate().is_err());
        p.target_users = 5;
        p.spawn_rate = 0.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("requests.csv");
        let recs = vec![
            RequestRecord { start_ms: 1_700_000_000_000, response_time_ms: 12.5, success: true, user_id: 0 },
            RequestRecord { start_ms: 1_700_000_000_010, response_time_ms: 0.25, success: false, user_id: 3 },
        ];
        write_requests_csv(&path, &recs).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("start_ms,response_time_ms,success,user_id\n"));
        assert!(!text.contains('\r'));
        assert_eq!(read_requests_csv(&path).unwrap(), recs);
    }
}
