//! Browser bindings. Every entry point takes plain values and returns a JSON
//! string so the page needs no glue beyond `JSON.parse`.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;
use ztmesh_core::config::ScenarioConfig;
use ztmesh_core::conformance::measure_step_counts;
use ztmesh_core::control_plane::{AccessLevel, AccessRequest, AuthorizationDecision, DecisionReason, TimeRange};
use ztmesh_core::crypto::{self, Certificate};
use ztmesh_core::metrics::nearest_rank;
use ztmesh_core::protocol::{issue_token, verify_token, TokenLedger};
use ztmesh_core::scenario;

fn error(message: impl ToString) -> String {
    json!({ "error": message.to_string() }).to_string()
}

/// Measured and expected operation counts per protocol step.
#[wasm_bindgen]
pub fn operation_counts(seed: u64) -> String {
    match measure_step_counts(seed) {
        Ok(rows) => Value::Array(
            rows.iter()
                .map(|r| {
                    json!({
                        "step": r.step,
                        "expected": r.expected.to_string(),
                        "measured": r.measured.to_string(),
                        "pass": r.passed(),
                    })
                })
                .collect(),
        )
        .to_string(),
        Err(e) => error(e),
    }
}

/// Issues one token scoped to `scope` (comma separated) for
/// `[start_ms, end_ms]` and `intention`, then presents it twice for
/// `resource` at `now_ms`. The second presentation shows replay handling.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn token_walkthrough(
    seed: u64,
    scope: &str,
    start_ms: u64,
    end_ms: u64,
    intention: &str,
    resource: &str,
    presented_intention: &str,
    now_ms: u64,
) -> String {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let am = crypto::generate_keypair_with(&mut rng);
    let dev = crypto::generate_keypair_with(&mut rng);
    let cert = Certificate::issue(&am.secret, "target", "device", dev.public);
    let decision = AuthorizationDecision {
        allow: true,
        scope: scope.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect(),
        time_range: TimeRange { start_ms, end_ms: end_ms.max(start_ms) },
        intention: intention.to_string(),
        reason: DecisionReason::Granted,
    };
    let mut ledger = TokenLedger::default();
    let token = match issue_token(&am.secret, &mut ledger, "device", &decision, &mut rng) {
        Ok(t) => t,
        Err(e) => return error(e),
    };
    let request = match AccessRequest::new(cert, "target", resource, AccessLevel::Read, presented_intention) {
        Ok(r) => r,
        Err(e) => return error(e),
    };
    let attempts: Vec<Value> = (0..2)
        .map(|_| match verify_token(&mut ledger, &am.public, &token, &request, now_ms) {
            Ok(_) => json!({ "granted": true }),
            Err(d) => json!({ "granted": false, "denial": d.as_str() }),
        })
        .collect();
    json!({
        "nonce": hex_nonce(&token.nonce),
        "bytes": token.to_bytes().len(),
        "attempts": attempts,
    })
    .to_string()
}

fn hex_nonce(nonce: &[u8]) -> String {
    nonce.iter().map(|b| format!("{b:02x}")).collect()
}

/// Runs a scenario given as JSON and returns per-phase latency statistics,
/// throughput and outcome counts.
#[wasm_bindgen]
pub fn run_scenario(config_json: &str) -> String {
    let cfg = match ScenarioConfig::parse(config_json) {
        Ok(c) => c,
        Err(e) => return error(e),
    };
    let out = match scenario::simulate(&cfg, false) {
        Ok(o) => o,
        Err(e) => return error(e),
    };
    let mut phases: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in &out.latency {
        phases.entry(r.phase.to_string()).or_default().push(r.ms);
    }
    let latency: Vec<Value> = phases
        .iter()
        .map(|(phase, v)| {
            json!({
                "phase": phase,
                "count": v.len(),
                "mean_ms": v.iter().sum::<f64>() / v.len() as f64,
                "p95_ms": nearest_rank(v, 95.0).ok(),
            })
        })
        .collect();
    let throughput: Vec<Value> = out
        .throughput
        .iter()
        .map(|t| json!({ "domains": t.domains, "devices": t.devices, "rate_rps": t.rate_rps }))
        .collect();
    json!({ "latency": latency, "throughput": throughput }).to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn operation_counts_all_pass() {
        let rows: Vec<Value> = serde_json::from_str(&operation_counts(1)).unwrap();
        assert_eq!(rows.len(), 8);
        assert!(rows.iter().all(|r| r["pass"] == true));
    }

    #[test]
    fn second_presentation_is_a_replay() {
        let v: Value = serde_json::from_str(&token_walkthrough(3, "db, files", 0, 100, "read", "db", "read", 50)).unwrap();
        assert_eq!(v["attempts"][0]["granted"], true);
        assert_eq!(v["attempts"][1]["denial"], "replay");
        let v: Value = serde_json::from_str(&token_walkthrough(3, "db", 0, 100, "read", "files", "read", 50)).unwrap();
        assert_eq!(v["attempts"][0]["denial"], "scope");
        let v: Value = serde_json::from_str(&token_walkthrough(3, "db", 0, 100, "read", "db", "read", 500)).unwrap();
        assert_eq!(v["attempts"][0]["denial"], "expired");
    }

    #[test]
    fn scenario_reports_phases_or_errors() {
        let v: Value = serde_json::from_str(&run_scenario(r#"{"workload": {"device_count": 2, "total_requests": 6}, "sim": {"pretrain_rounds": 1}, "dfl": {"data": {"samples_per_domain": 40, "validation_per_domain": 10, "test_samples": 40}}}"#)).unwrap();
        assert!(!v["latency"].as_array().unwrap().is_empty());
        let v: Value = serde_json::from_str(&run_scenario("{\"sede\": 1}")).unwrap();
        assert!(v["error"].as_str().unwrap().contains("line 1"));
    }
}
