//! Operation counters, latency and throughput collection, CSV outputs.

pub mod bench;
pub mod counters;
pub mod csv_io;
pub mod overhead;

pub use bench::{
    mean_latency, nearest_rank, percentile_latency, throughput_curve, BenchError, LatencySample, Phase,
    ThroughputRecord,
};
pub use counters::{charge, measure, snapshot, CounterError, CounterScope, Op, OpCounters};
