//! One domain's authentication, trust, policy and context components, and
//! the intra-domain request pipeline.

pub mod am;
pub mod cam;
pub mod policy;
pub mod request;
pub mod trust;

use serde::{Deserialize, Serialize};

pub use am::{AmError, AuthenticationModule, DeviceOrigin};
pub use cam::{CamError, ContextAwareModule};
pub use policy::{AuthorizationDecision, DecisionReason, PolicyConfig, PolicyEngine, TimeRange};
pub use request::{AccessLevel, AccessRequest, DeviceContextRecord, RequestError};
pub use trust::{TrustEngine, TrustEvidence, TrustRules, TrustScore};

use crate::crypto::KeyPair;
use crate::dfl::{predict_context, ContextPrediction, ModelParameters};
use crate::protocol::TokenLedger;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZtaConfig {
    pub trust: TrustRules,
    pub policy: PolicyConfig,
}

impl ZtaConfig {
    pub fn validate(&self) -> Result<(), String> {
        self.trust.validate()?;
        self.policy.validate()
    }
}

/// Everything the pipeline computed for one request.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub authenticated: bool,
    pub prediction: Option<ContextPrediction>,
    pub trust: Option<TrustScore>,
    pub decision: AuthorizationDecision,
}

#[derive(Debug)]
pub struct ControlPlane {
    pub id: String,
    pub am: AuthenticationModule,
    pub te: TrustEngine,
    pub pe: PolicyEngine,
    pub cam: ContextAwareModule,
    /// The domain's context model; absent until training has produced one.
    pub model: Option<ModelParameters>,
    pub ledger: TokenLedger,
}

impl ControlPlane {
    pub fn new(id: impl Into<String>, am_keys: KeyPair, config: &ZtaConfig, input_dim: usize, classes: usize) -> Self {
        let id = id.into();
        ControlPlane {
            am: AuthenticationModule::new(id.clone(), am_keys),
            te: TrustEngine::new(config.trust.clone()),
            pe: PolicyEngine::new(config.policy.clone()),
            cam: ContextAwareModule::new(input_dim, classes),
            model: None,
            ledger: TokenLedger::default(),
            id,
        }
    }

    /// Authenticate, then assess trust only if that passed, then decide.
    pub fn evaluate(&self, request: &AccessRequest, now_ms: u64) -> Evaluation {
        if !self.am.authenticate(request) {
            let decision = self.pe.decide(request, false, &TrustScore::unassessed(), now_ms);
            return Evaluation { authenticated: false, prediction: None, trust: None, decision };
        }
        self.authorize(request, now_ms)
    }

    /// Trust assessment and policy decision for an already authenticated
    /// request.
    ///
    /// A local device's context comes from the CAM; a foreign device's comes
    /// from the model's prediction for its id.
    pub fn authorize(&self, request: &AccessRequest, now_ms: u64) -> Evaluation {
        let origin = self.am.origin_of(request);
        let prediction = self.model.as_ref().map(|m| predict_context(m, &request.device_id));
        let observed = match origin {
            DeviceOrigin::Local => self.cam.latest_for(&request.device_id).cloned(),
            _ => None,
        };
        let context = observed.or_else(|| {
            prediction.as_ref().map(|p| DeviceContextRecord {
                device_id: request.device_id.clone(),
                context_class: p.class,
                feature_vector: p.features.clone(),
                timestamp_ms: now_ms,
            })
        });
        let evidence = TrustEvidence {
            origin,
            context: context.as_ref(),
            prediction: prediction.as_ref(),
            model: self.model.as_ref(),
            now_ms,
        };
        let trust = self.te.assess_trust(request, evidence);
        let decision = self.pe.decide(request, true, &trust, now_ms);
        Evaluation { authenticated: true, prediction, trust: Some(trust), decision }
    }
}
