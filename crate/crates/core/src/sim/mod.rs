//! Discrete-event simulation of domains, their links and the request
//! workload.

pub mod engine;
pub mod events;
pub mod topology;
pub mod workload;

use thiserror::Error;

pub use engine::{CostTable, Outcome, OutcomeCounts, RequestSummary, SimConfig, SimReport, Simulation};
pub use events::{EventQueue, SimTime};
pub use topology::{EdgeSpec, Topology, DEFAULT_LATENCY_MS};
pub use workload::{generate_workload, PlannedDevice, Workload, WorkloadPlan};

use crate::dfl::DflError;
use crate::metrics::OpCounters;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("event at {at} is before the current time {now}")]
    PastEvent { at: SimTime, now: SimTime },
    #[error("`{from}` and `{to}` are not neighbours")]
    NotNeighbors { from: String, to: String },
    #[error("unknown device `{0}`")]
    UnknownDevice(String),
    #[error("topology: {0}")]
    Topology(String),
    #[error("workload: {0}")]
    Workload(String),
    #[error("config: {0}")]
    Config(String),
    #[error("request {request}: expected {expected}, charged {measured}")]
    CounterMismatch { request: u64, expected: OpCounters, measured: OpCounters },
    #[error("dfl: {0}")]
    Dfl(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl From<DflError> for SimError {
    fn from(e: DflError) -> Self {
        SimError::Dfl(e.to_string())
    }
}
