use rand::Rng;
use serde::{Deserialize, Serialize};

use super::topology::Topology;
use super::SimError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Workload {
    pub device_count: usize,
    pub total_requests: usize,
    pub cross_domain_fraction: f64,
    /// Requests in flight at once per issuing domain.
    pub parallelism: usize,
    pub seed: u64,
    /// Domains whose devices issue requests; empty means all.
    pub issuing_domains: Vec<String>,
    pub resources: Vec<String>,
    pub intention: String,
}

impl Default for Workload {
    fn default() -> Self {
        Workload {
            device_count: 10,
            total_requests: 100,
            cross_domain_fraction: 1.0,
            parallelism: 4,
            seed: 0,
            issuing_domains: Vec::new(),
            resources: vec!["sensor/telemetry".into()],
            intention: "read telemetry".into(),
        }
    }
}

impl Workload {
    pub fn validate(&self) -> Result<(), String> {
        if self.device_count == 0 {
            return Err("device_count must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.cross_domain_fraction) {
            return Err("cross_domain_fraction must lie in [0, 1]".into());
        }
        if self.parallelism == 0 {
            return Err("parallelism must be at least 1".into());
        }
        if self.resources.is_empty() || self.resources.iter().any(String::is_empty) {
            return Err("resources must be a non-empty list of non-empty names".into());
        }
        if self.intention.trim().is_empty() {
            return Err("intention must not be empty".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlannedDevice {
    pub id: String,
    pub home: usize,
    pub quota: usize,
}

/// Device placement, per-device request quotas and the devices that start
/// issuing at time zero.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadPlan {
    pub devices: Vec<PlannedDevice>,
    /// Per issuing domain, device indices in the order they take a slot.
    pub queues: Vec<Vec<usize>>,
    pub parallelism: usize,
    pub cross_domain_fraction: f64,
}

/// Devices are dealt round-robin over the issuing domains and requests
/// evenly over the devices, so quotas differ by at most one.
pub fn generate_workload(w: &Workload, topology: &Topology) -> Result<WorkloadPlan, SimError> {
    w.validate().map_err(SimError::Workload)?;
    let issuing: Vec<usize> = if w.issuing_domains.is_empty() {
        (0..topology.len()).collect()
    } else {
        w.issuing_domains
            .iter()
            .map(|d| topology.index_of(d).ok_or_else(|| SimError::Workload(format!("unknown issuing domain `{d}`"))))
            .collect::<Result<_, _>>()?
    };
    if issuing.is_empty() {
        return Err(SimError::Workload("no issuing domains".into()));
    }
    let base = w.total_requests / w.device_count;
    let extra = w.total_requests % w.device_count;
    let mut queues = vec![Vec::new(); topology.len()];
    let devices = (0..w.device_count)
        .map(|i| {
            let home = issuing[i % issuing.len()];
            queues[home].push(i);
            PlannedDevice { id: format!("dev-{i}"), home, quota: base + usize::from(i < extra) }
        })
        .collect();
    Ok(WorkloadPlan { devices, queues, parallelism: w.parallelism, cross_domain_fraction: w.cross_domain_fraction })
}

impl WorkloadPlan {
    pub fn total_requests(&self) -> usize {
        self.devices.iter().map(|d| d.quota).sum()
    }

    /// Devices that issue at time zero: the first `parallelism` with a
    /// non-zero quota in each domain.
    pub fn initial(&self) -> Vec<usize> {
        self.queues
            .iter()
            .flat_map(|q| q.iter().copied().filter(|&d| self.devices[d].quota > 0).take(self.parallelism))
            .collect()
    }

    /// Cross-domain target for a request from `home`, or `None` for an
    /// intra-domain request.
    pub fn draw_target<R: Rng + ?Sized>(&self, rng: &mut R, topology: &Topology, home: usize) -> Option<usize> {
        let neighbors = topology.neighbors(home);
        let cross: f64 = rng.gen();
        if neighbors.is_empty() || cross >= self.cross_domain_fraction {
            return None;
        }
        Some(neighbors[rng.gen_range(0..neighbors.len())])
    }
}
