use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum BenchError {
    #[error("no samples")]
    EmptyInput,
    #[error("percentile {0} outside 0..=100")]
    BadPercentile(f64),
    #[error("unknown phase `{0}`")]
    UnknownPhase(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Source domain issues the request until the sealed request reaches the target.
    DataSharing,
    /// Request issue until the token (or denial) is back with the device.
    FullPreauthorization,
    /// Token presentation at the target until the grant decision.
    TokenVerification,
    /// Intra-domain request handled entirely at the device's home domain.
    IntraDomain,
}

impl Phase {
    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::DataSharing => "data_sharing",
            Phase::FullPreauthorization => "full_preauthorization",
            Phase::TokenVerification => "token_verification",
            Phase::IntraDomain => "intra_domain",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Phase {
    type Err = BenchError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "data_sharing" => Phase::DataSharing,
            "full_preauthorization" => Phase::FullPreauthorization,
            "token_verification" => Phase::TokenVerification,
            "intra_domain" => Phase::IntraDomain,
            other => return Err(BenchError::UnknownPhase(other.to_string())),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencySample {
    pub request_id: u64,
    pub phase: Phase,
    pub start_ms: f64,
    pub end_ms: f64,
}

impl LatencySample {
    pub fn new(request_id: u64, phase: Phase, start_ms: f64, end_ms: f64) -> Self {
        debug_assert!(end_ms >= start_ms, "latency sample ends before it starts");
        LatencySample { request_id, phase, start_ms, end_ms }
    }

    pub fn ms(&self) -> f64 {
        self.end_ms - self.start_ms
    }
}

/// Nearest-rank percentile: the `ceil(p/100 * n)`-th smallest value.
pub fn nearest_rank(values: &[f64], p: f64) -> Result<f64, BenchError> {
    if values.is_empty() {
        return Err(BenchError::EmptyInput);
    }
    if !(0.0..=100.0).contains(&p) {
        return Err(BenchError::BadPercentile(p));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let rank = ((p / 100.0) * n as f64).ceil() as usize;
    Ok(sorted[rank.clamp(1, n) - 1])
}

pub fn percentile_latency(samples: &[LatencySample], phase: Phase, p: f64) -> Result<f64, BenchError> {
    let values: Vec<f64> = samples.iter().filter(|s| s.phase == phase).map(LatencySample::ms).collect();
    nearest_rank(&values, p)
}

pub fn mean_latency(samples: &[LatencySample], phase: Phase) -> Result<f64, BenchError> {
    let values: Vec<f64> = samples.iter().filter(|s| s.phase == phase).map(LatencySample::ms).collect();
    if values.is_empty() {
        return Err(BenchError::EmptyInput);
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThroughputRecord {
    pub domains: usize,
    pub devices: usize,
    pub window_s: f64,
    pub completed: u64,
    pub rate_rps: f64,
}

impl ThroughputRecord {
    pub fn new(domains: usize, devices: usize, completed: u64, window_s: f64) -> Self {
        let rate_rps = if window_s > 0.0 { completed as f64 / window_s } else { 0.0 };
        ThroughputRecord { domains, devices, window_s, completed, rate_rps }
    }
}

/// Throughput keyed by domain count, each curve ordered by device count.
pub type ThroughputCurves = BTreeMap<usize, Vec<(usize, f64)>>;

pub fn throughput_curve(runs: &[ThroughputRecord]) -> Result<ThroughputCurves, BenchError> {
    if runs.is_empty() {
        return Err(BenchError::EmptyInput);
    }
    let mut curves: ThroughputCurves = BTreeMap::new();
    for r in runs {
        curves.entry(r.domains).or_default().push((r.devices, r.rate_rps));
    }
    for curve in curves.values_mut() {
        curve.sort_by_key(|(devices, _)| *devices);
    }
    Ok(curves)
}
