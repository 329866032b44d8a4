use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::am::DeviceOrigin;
use super::request::{AccessLevel, AccessRequest, DeviceContextRecord};
use crate::dfl::{ContextPrediction, ModelParameters};

const HOUR_MS: u64 = 3_600_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RuleWeights {
    pub known_device: f64,
    pub time_window: f64,
    pub access_level: f64,
    pub context_anomaly: f64,
    pub model_confidence: f64,
}

impl Default for RuleWeights {
    fn default() -> Self {
        RuleWeights { known_device: 1.0, time_window: 1.0, access_level: 1.0, context_anomaly: 3.0, model_confidence: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrustRules {
    pub weights: RuleWeights,
    /// Hours `[start, end)` of simulated local time that count as in-window.
    pub business_hours: (u32, u32),
    /// Local hour at simulated time zero.
    pub clock_origin_hour: u32,
    pub read_score: f64,
    pub write_score: f64,
    pub admin_score: f64,
    pub anomalous_classes: Vec<usize>,
    pub foreign_device_score: f64,
    /// Score returned when no context is available.
    pub absent_context_score: f64,
    /// Model confidence at or above this earns the full contribution.
    pub confidence_target: f64,
}

impl Default for TrustRules {
    fn default() -> Self {
        TrustRules {
            weights: RuleWeights::default(),
            business_hours: (6, 22),
            clock_origin_hour: 9,
            read_score: 1.0,
            write_score: 0.6,
            admin_score: 0.2,
            anomalous_classes: vec![3],
            foreign_device_score: 0.5,
            absent_context_score: 0.3,
            confidence_target: 0.5,
        }
    }
}

impl TrustRules {
    pub fn validate(&self) -> Result<(), String> {
        let w = &self.weights;
        let all = [w.known_device, w.time_window, w.access_level, w.context_anomaly, w.model_confidence];
        if all.iter().any(|v| !v.is_finite() || *v < 0.0) || all.iter().sum::<f64>() <= 0.0 {
            return Err("rule weights must be non-negative with a positive sum".into());
        }
        let scores = [self.read_score, self.write_score, self.admin_score, self.foreign_device_score, self.absent_context_score];
        if scores.iter().any(|s| !(0.0..=1.0).contains(s)) {
            return Err("rule scores must lie in [0, 1]".into());
        }
        if self.business_hours.0 > 24 || self.business_hours.1 > 24 || self.clock_origin_hour >= 24 {
            return Err("hours must lie in 0..=24".into());
        }
        if self.confidence_target <= 0.0 {
            return Err("confidence_target must be positive".into());
        }
        Ok(())
    }

    fn level_score(&self, level: AccessLevel) -> f64 {
        match level {
            AccessLevel::Read => self.read_score,
            AccessLevel::Write => self.write_score,
            AccessLevel::Admin => self.admin_score,
        }
    }

    pub fn local_hour(&self, timestamp_ms: u64) -> u32 {
        ((u64::from(self.clock_origin_hour) + timestamp_ms / HOUR_MS) % 24) as u32
    }

    fn in_window(&self, timestamp_ms: u64) -> bool {
        let h = self.local_hour(timestamp_ms);
        let (start, end) = self.business_hours;
        if start <= end {
            (start..end).contains(&h)
        } else {
            h >= start || h < end
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrustScore {
    pub value: f64,
    /// Weighted, normalised contributions keyed by rule name; they sum to `value`.
    pub components: BTreeMap<String, f64>,
}

impl TrustScore {
    /// Placeholder for requests that never reached the trust engine.
    pub fn unassessed() -> Self {
        TrustScore { value: 0.0, components: BTreeMap::new() }
    }

    fn from_components(components: BTreeMap<String, f64>) -> Self {
        let value = components.values().sum::<f64>().clamp(0.0, 1.0);
        TrustScore { value, components }
    }
}

/// What the trust engine may consult besides the request itself.
#[derive(Debug, Clone, Copy)]
pub struct TrustEvidence<'a> {
    pub origin: DeviceOrigin,
    pub context: Option<&'a DeviceContextRecord>,
    pub prediction: Option<&'a ContextPrediction>,
    pub model: Option<&'a ModelParameters>,
    /// Simulated time of the request; drives the time-window rule.
    pub now_ms: u64,
}

#[derive(Debug, Clone, Default)]
pub struct TrustEngine {
    pub rules: TrustRules,
}

impl TrustEngine {
    pub fn new(rules: TrustRules) -> Self {
        TrustEngine { rules }
    }

    /// Weighted mean of rule contributions. With a model present, the model's
    /// confidence in the record's class is one more rule and charges `I`.
    pub fn assess_trust(&self, request: &AccessRequest, evidence: TrustEvidence<'_>) -> TrustScore {
        let r = &self.rules;
        let Some(ctx) = evidence.context else {
            return TrustScore::from_components(BTreeMap::from([("context_absent".to_string(), r.absent_context_score)]));
        };
        let w = &r.weights;
        let known = match evidence.origin {
            DeviceOrigin::Local => 1.0,
            DeviceOrigin::Foreign => r.foreign_device_score,
            DeviceOrigin::Unknown => 0.0,
        };
        let anomalous = r.anomalous_classes.contains(&ctx.context_class)
            || evidence.prediction.is_some_and(|p| r.anomalous_classes.contains(&p.class));
        let mut raw = vec![
            ("known_device", w.known_device, known),
            ("time_window", w.time_window, if r.in_window(evidence.now_ms) { 1.0 } else { 0.0 }),
            ("access_level", w.access_level, r.level_score(request.access_level)),
            ("context_anomaly", w.context_anomaly, if anomalous { 0.0 } else { 1.0 }),
        ];
        if let Some(model) = evidence.model {
            let probs = model.infer(&ctx.feature_vector);
            let conf = probs.get(ctx.context_class).copied().unwrap_or(0.0);
            raw.push(("model_confidence", w.model_confidence, (conf / r.confidence_target).min(1.0)));
        }
        let total: f64 = raw.iter().map(|(_, w, _)| w).sum();
        let components = raw.into_iter().map(|(name, w, c)| (name.to_string(), w * c / total)).collect();
        TrustScore::from_components(components)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{self, Certificate};

    fn request(level: AccessLevel) -> AccessRequest {
        let k = crypto::generate_keypair(Some(1));
        let cert = Certificate::issue(&k.secret, "a", "dev", k.public);
        AccessRequest::new(cert, "a", "res", level, "x").unwrap()
    }

    fn record(class: usize) -> DeviceContextRecord {
        DeviceContextRecord { device_id: "dev".into(), context_class: class, feature_vector: vec![0.5; 16], timestamp_ms: 0 }
    }

    fn score_at(level: AccessLevel, ctx: Option<&DeviceContextRecord>, now_ms: u64) -> f64 {
        let te = TrustEngine::default();
        let ev = TrustEvidence { origin: DeviceOrigin::Local, context: ctx, prediction: None, model: None, now_ms };
        te.assess_trust(&request(level), ev).value
    }

    fn score(level: AccessLevel, ctx: Option<&DeviceContextRecord>) -> f64 {
        score_at(level, ctx, 0)
    }

    #[test]
    fn hand_evaluated_rule_table() {
        assert_eq!(score(AccessLevel::Read, None), 0.3);
        assert!((score(AccessLevel::Read, Some(&record(0))) - 1.0).abs() < 1e-12);
        // weights 1,1,1,3: 3.0/6 and 1.2/6
        assert!((score(AccessLevel::Read, Some(&record(3))) - 0.5).abs() < 1e-12);
        let admin_anomalous = score(AccessLevel::Admin, Some(&record(3)));
        assert!((admin_anomalous - 2.2 / 6.0).abs() < 1e-12);
        assert!(admin_anomalous < 0.6);
    }

    #[test]
    fn out_of_hours_costs_time_rule() {
        // 09:00 + 14h = 23:00
        let r = record(0);
        assert!((score_at(AccessLevel::Read, Some(&r), 14 * HOUR_MS) - 5.0 / 6.0).abs() < 1e-12);
        assert_eq!(TrustRules::default().local_hour(15 * HOUR_MS), 0);
    }

    #[test]
    fn components_sum_to_value() {
        let te = TrustEngine::default();
        let ctx = record(1);
        let ev = TrustEvidence { origin: DeviceOrigin::Foreign, context: Some(&ctx), prediction: None, model: None, now_ms: 0 };
        let s = te.assess_trust(&request(AccessLevel::Write), ev);
        assert!((s.components.values().sum::<f64>() - s.value).abs() < 1e-12);
    }
}
