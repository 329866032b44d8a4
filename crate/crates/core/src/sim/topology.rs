use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::SimError;

pub const DEFAULT_LATENCY_MS: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub a: String,
    pub b: String,
    #[serde(default = "default_latency")]
    pub latency_ms: f64,
}

fn default_latency() -> f64 {
    DEFAULT_LATENCY_MS
}

/// Domains and the undirected neighbour relation between them.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    domains: Vec<String>,
    index: BTreeMap<String, usize>,
    /// Keyed by `(min, max)` index.
    edges: BTreeMap<(usize, usize), f64>,
}

impl Topology {
    pub fn new(domains: Vec<String>, edges: &[EdgeSpec]) -> Result<Self, SimError> {
        let mut index = BTreeMap::new();
        for (i, d) in domains.iter().enumerate() {
            if d.is_empty() || d.contains([',', '\n', '\t']) {
                return Err(SimError::Topology(format!("invalid domain id `{d}`")));
            }
            if index.insert(d.clone(), i).is_some() {
                return Err(SimError::Topology(format!("duplicate domain `{d}`")));
            }
        }
        let mut map = BTreeMap::new();
        for e in edges {
            let a = *index.get(&e.a).ok_or_else(|| SimError::Topology(format!("unknown domain `{}`", e.a)))?;
            let b = *index.get(&e.b).ok_or_else(|| SimError::Topology(format!("unknown domain `{}`", e.b)))?;
            if a == b {
                return Err(SimError::Topology(format!("self-loop on `{}`", e.a)));
            }
            if !e.latency_ms.is_finite() || e.latency_ms < 0.0 {
                return Err(SimError::Topology(format!("edge {}-{}: latency must be finite and >= 0", e.a, e.b)));
            }
            if map.insert((a.min(b), a.max(b)), e.latency_ms).is_some() {
                return Err(SimError::Topology(format!("duplicate edge {}-{}", e.a, e.b)));
            }
        }
        Ok(Topology { domains, index, edges: map })
    }

    /// `hub` connected to `leaves` leaf domains `d1..dn`.
    pub fn star(leaves: usize, latency_ms: f64) -> Self {
        let mut domains = vec!["hub".to_string()];
        domains.extend((1..=leaves).map(|i| format!("d{i}")));
        let edges: Vec<EdgeSpec> =
            (1..=leaves).map(|i| EdgeSpec { a: "hub".into(), b: format!("d{i}"), latency_ms }).collect();
        Topology::new(domains, &edges).expect("generated star is simple")
    }

    /// Domains `d1..dn`, all pairwise adjacent.
    pub fn complete(n: usize, latency_ms: f64) -> Self {
        let domains: Vec<String> = (1..=n).map(|i| format!("d{i}")).collect();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                edges.push(EdgeSpec { a: domains[i].clone(), b: domains[j].clone(), latency_ms });
            }
        }
        Topology::new(domains, &edges).expect("generated graph is simple")
    }

    pub fn len(&self) -> usize {
        self.domains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.domains.is_empty()
    }

    pub fn domains(&self) -> &[String] {
        &self.domains
    }

    pub fn name(&self, i: usize) -> &str {
        &self.domains[i]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn latency_ms(&self, a: usize, b: usize) -> Option<f64> {
        self.edges.get(&(a.min(b), a.max(b))).copied()
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.latency_ms(a, b).is_some()
    }

    /// Neighbour indices in ascending order.
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        let set: BTreeSet<usize> = self
            .edges
            .keys()
            .filter_map(|&(a, b)| if a == i { Some(b) } else if b == i { Some(a) } else { None })
            .collect();
        set.into_iter().collect()
    }

    pub fn edges(&self) -> Vec<EdgeSpec> {
        self.edges
            .iter()
            .map(|(&(a, b), &l)| EdgeSpec { a: self.domains[a].clone(), b: self.domains[b].clone(), latency_ms: l })
            .collect()
    }
}
