//! Scenario files: JSON, unknown keys rejected, every section validated at
//! load with the offending line reported.

use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control_plane::ZtaConfig;
use crate::dfl::{SyntheticSetup, TrainingHyperparams};
use crate::sim::{EdgeSpec, SimConfig, Topology, Workload, DEFAULT_LATENCY_MS};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("line {line}: `{field}`: {message}")]
    Invalid { line: usize, field: String, message: String },
}

fn default_latency() -> f64 {
    DEFAULT_LATENCY_MS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TopologyConfig {
    Explicit {
        domains: Vec<String>,
        #[serde(default)]
        edges: Vec<EdgeSpec>,
    },
    /// `hub` plus `leaves` leaf domains.
    Star {
        leaves: usize,
        #[serde(default = "default_latency")]
        latency_ms: f64,
    },
    /// `domains` domains, all pairwise adjacent.
    Complete {
        domains: usize,
        #[serde(default = "default_latency")]
        latency_ms: f64,
    },
}

impl Default for TopologyConfig {
    fn default() -> Self {
        TopologyConfig::Complete { domains: 2, latency_ms: DEFAULT_LATENCY_MS }
    }
}

fn check_latency(latency_ms: f64) -> Result<(), String> {
    if latency_ms.is_finite() && latency_ms >= 0.0 {
        Ok(())
    } else {
        Err("latency_ms must be finite and >= 0".into())
    }
}

impl TopologyConfig {
    pub fn build(&self) -> Result<Topology, String> {
        match self {
            TopologyConfig::Explicit { domains, edges } => {
                if domains.is_empty() {
                    return Err("at least one domain is required".into());
                }
                Topology::new(domains.clone(), edges).map_err(|e| e.to_string())
            }
            TopologyConfig::Star { leaves, latency_ms } => {
                check_latency(*latency_ms)?;
                if *leaves == 0 {
                    return Err("a star needs at least one leaf".into());
                }
                Ok(Topology::star(*leaves, *latency_ms))
            }
            TopologyConfig::Complete { domains, latency_ms } => {
                check_latency(*latency_ms)?;
                if *domains == 0 {
                    return Err("at least one domain is required".into());
                }
                Ok(Topology::complete(*domains, *latency_ms))
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DflConfig {
    pub hyperparams: TrainingHyperparams,
    /// Synthetic task shape, data seed and Dirichlet concentration.
    pub data: SyntheticSetup,
}

/// What `simulate` runs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Experiment {
    /// One run over the configured topology and workload.
    #[default]
    Single,
    /// Star topologies with `n` leaves, `q` concurrent devices per leaf, each
    /// device sending `requests_per_device` requests to the hub.
    LatencyGrid {
        neighbors: Vec<usize>,
        parallel: Vec<usize>,
        requests_per_device: usize,
        #[serde(default = "default_latency")]
        latency_ms: f64,
    },
    /// Complete graphs of each domain count, `total_requests` spread evenly
    /// over each device count, all devices active at once.
    ThroughputGrid {
        domains: Vec<usize>,
        devices: Vec<usize>,
        total_requests: usize,
        #[serde(default = "default_latency")]
        latency_ms: f64,
    },
    /// DFL training only, over the configured topology.
    Training,
}

impl Experiment {
    fn validate(&self) -> Result<(), (&'static str, String)> {
        let positive = |field: &'static str, v: &[usize]| {
            if v.is_empty() || v.contains(&0) {
                Err((field, "must be a non-empty list of positive integers".to_string()))
            } else {
                Ok(())
            }
        };
        match self {
            Experiment::Single | Experiment::Training => Ok(()),
            Experiment::LatencyGrid { neighbors, parallel, requests_per_device, latency_ms } => {
                positive("neighbors", neighbors)?;
                positive("parallel", parallel)?;
                if *requests_per_device == 0 {
                    return Err(("requests_per_device", "must be at least 1".into()));
                }
                check_latency(*latency_ms).map_err(|m| ("latency_ms", m))
            }
            Experiment::ThroughputGrid { domains, devices, total_requests, latency_ms } => {
                positive("domains", domains)?;
                positive("devices", devices)?;
                if *total_requests == 0 {
                    return Err(("total_requests", "must be at least 1".into()));
                }
                check_latency(*latency_ms).map_err(|m| ("latency_ms", m))
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub topology: TopologyConfig,
    pub workload: Workload,
    pub dfl: DflConfig,
    pub zta: ZtaConfig,
    pub sim: SimConfig,
    pub experiment: Experiment,
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| ConfigError::Syntax {
            line: e.line(),
            column: e.column(),
            message: strip_position(&e.to_string()),
        })?;
        cfg.validate(text)?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    fn validate(&self, text: &str) -> Result<(), ConfigError> {
        let invalid = |path: &[&str], message: String| ConfigError::Invalid {
            line: locate(text, path),
            field: path.join("."),
            message,
        };
        self.topology.build().map_err(|m| invalid(&["topology"], m))?;
        self.workload.validate().map_err(|m| invalid(&["workload"], m))?;
        self.dfl.hyperparams.validate().map_err(|e| invalid(&["dfl", "hyperparams"], e.to_string()))?;
        self.dfl.data.architecture().map_err(|e| invalid(&["dfl", "data"], e.to_string()))?;
        if self.dfl.data.samples_per_domain == 0 || self.dfl.data.validation_per_domain == 0 || self.dfl.data.test_samples == 0
        {
            return Err(invalid(&["dfl", "data"], "sample counts must be positive".into()));
        }
        if !(self.dfl.data.dirichlet_alpha > 0.0 && self.dfl.data.dirichlet_alpha.is_finite()) {
            return Err(invalid(&["dfl", "data", "dirichlet_alpha"], "must be positive".into()));
        }
        self.zta.validate().map_err(|m| invalid(&["zta"], m))?;
        self.sim.validate().map_err(|m| invalid(&["sim"], m))?;
        self.experiment.validate().map_err(|(field, m)| invalid(&["experiment", field], m))?;
        Ok(())
    }
}

/// serde_json appends " at line L column C"; the position is reported
/// separately.
fn strip_position(message: &str) -> String {
    match message.rfind(" at line ") {
        Some(i) => message[..i].to_string(),
        None => message.to_string(),
    }
}

/// 1-based line of the deepest key of `path` found in order, or of the
/// nearest enclosing key that is present.
fn locate(text: &str, path: &[&str]) -> usize {
    let mut offset = 0;
    for key in path {
        let needle = format!("\"{key}\"");
        match text[offset..].find(&needle) {
            Some(i) => offset += i,
            None => break,
        }
    }
    text[..offset].matches('\n').count() + 1
}
