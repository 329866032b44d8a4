use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::request::{AccessLevel, AccessRequest};
use super::trust::TrustScore;
use crate::metrics::{charge, Op};

pub const DEFAULT_THRESHOLD: f64 = 0.6;
/// Five simulated minutes.
pub const DEFAULT_TOKEN_TTL_MS: u64 = 300_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionReason {
    Granted,
    Authentication,
    Trust,
    Policy,
}

impl DecisionReason {
    pub fn as_str(self) -> &'static str {
        match self {
            DecisionReason::Granted => "granted",
            DecisionReason::Authentication => "authentication",
            DecisionReason::Trust => "trust",
            DecisionReason::Policy => "policy",
        }
    }

    pub fn from_code(s: &str) -> Option<Self> {
        [DecisionReason::Granted, DecisionReason::Authentication, DecisionReason::Trust, DecisionReason::Policy]
            .into_iter()
            .find(|r| r.as_str() == s)
    }
}

impl fmt::Display for DecisionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Validity window in simulated milliseconds, both ends inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TimeRange {
    pub start_ms: u64,
    pub end_ms: u64,
}

impl TimeRange {
    pub fn contains(&self, t_ms: u64) -> bool {
        self.start_ms <= t_ms && t_ms <= self.end_ms
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuthorizationDecision {
    pub allow: bool,
    pub scope: BTreeSet<String>,
    pub time_range: TimeRange,
    pub intention: String,
    pub reason: DecisionReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    pub threshold: f64,
    pub token_ttl_ms: u64,
    /// Levels allowed per resource; resources not listed fall back to `default_levels`.
    pub acl: BTreeMap<String, BTreeSet<AccessLevel>>,
    pub default_levels: BTreeSet<AccessLevel>,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            threshold: DEFAULT_THRESHOLD,
            token_ttl_ms: DEFAULT_TOKEN_TTL_MS,
            acl: BTreeMap::new(),
            default_levels: BTreeSet::from([AccessLevel::Read, AccessLevel::Write]),
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err("threshold must lie in [0, 1]".into());
        }
        if self.token_ttl_ms == 0 {
            return Err("token_ttl_ms must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct PolicyEngine {
    pub config: PolicyConfig,
}

impl PolicyEngine {
    pub fn new(config: PolicyConfig) -> Self {
        PolicyEngine { config }
    }

    pub fn permits(&self, resource: &str, level: AccessLevel) -> bool {
        self.config.acl.get(resource).unwrap_or(&self.config.default_levels).contains(&level)
    }

    /// Authentication, then trust, then the resource ACL. Charges `CP`.
    pub fn decide(&self, request: &AccessRequest, authenticated: bool, trust: &TrustScore, now_ms: u64) -> AuthorizationDecision {
        charge(Op::Policy);
        let reason = if !authenticated {
            DecisionReason::Authentication
        } else if trust.value < self.config.threshold {
            DecisionReason::Trust
        } else if !self.permits(&request.resource, request.access_level) {
            DecisionReason::Policy
        } else {
            DecisionReason::Granted
        };
        let allow = reason == DecisionReason::Granted;
        AuthorizationDecision {
            allow,
            scope: if allow { BTreeSet::from([request.resource.clone()]) } else { BTreeSet::new() },
            time_range: TimeRange {
                start_ms: now_ms,
                end_ms: if allow { now_ms + self.config.token_ttl_ms } else { now_ms },
            },
            intention: request.access_intention.trim().to_string(),
            reason,
        }
    }
}
