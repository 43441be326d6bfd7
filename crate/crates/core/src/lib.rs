//! Trace-driven RowHammer mitigation simulation.
//!
//! Two trackers are compared on activation traces: an aggressor-counting
//! tracker that refreshes every row in the blast radius of a hot row, and a
//! victim-counting tracker that refreshes only the neighbours whose
//! accumulated disturbance is near the limit. An exact per-row disturbance
//! model ([`oracle`]) checks that neither lets a row reach `t_rh`.

pub mod config;
pub mod count_table;
pub mod dram;
pub mod energy;
pub mod error;
pub mod harness;
pub mod oracle;
pub mod report;
pub mod tracker;
pub mod workloads;

pub use count_table::CountTable;
pub use dram::{DramConfig, PhaseModel, Row};
pub use energy::{Energy, EnergyModel};
pub use error::{Error, Result};
pub use harness::{compare, run, ComparisonReport, RunReport};
pub use oracle::{Flip, OracleState};
pub use tracker::{MitigationAction, Mode, RetriggerPolicy, Tracker, TrackerOptions};
pub use workloads::{Record, Trace};
