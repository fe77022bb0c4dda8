//! Performance-antipattern workbench.
//!
//! [`workload`] serves the ten antipattern endpoints, [`load`] drives them with
//! closed-loop virtual users, [`telemetry`] samples power and resources at
//! 1 Hz, [`orchestrator`] runs repeated trials into artifact directories and
//! [`analysis`] / [`report`] turn those into tables.

// Range checks are written `!(x > 0.0)` on purpose so NaN fails them too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod clock;
mod csvio;
pub mod error;
pub mod load;
pub mod orchestrator;
pub mod report;
pub mod telemetry;
pub mod workload;

pub use error::{Error, Result};
