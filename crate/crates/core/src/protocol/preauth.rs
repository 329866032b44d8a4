use rand::{CryptoRng, RngCore};

use super::channel::Channel;
use super::serialize::{deserialize_request, serialize_request};
use super::token::{issue_token, verify_token, Grant, OneTimeToken, TokenDenial};
use super::ProtocolError;
use crate::control_plane::{AccessRequest, ControlPlane, DecisionReason, Evaluation};
use crate::wire::{self, MessageType, WireError};

/// Serialize and seal a request for the target domain.
pub fn seal_request<R: RngCore>(channel: &Channel, request: &AccessRequest, rng: &mut R) -> Result<Vec<u8>, ProtocolError> {
    channel.seal(MessageType::SealedRequest, &serialize_request(request)?, rng)
}

pub fn open_sealed_request(channel: &Channel, envelope: &[u8]) -> Result<AccessRequest, ProtocolError> {
    deserialize_request(&channel.unseal(MessageType::SealedRequest, envelope)?)
}

/// What the target domain sends back. Travels unencrypted: the token is
/// signed and bound to the device, scope and intention.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PreauthResponse {
    Token(OneTimeToken),
    Denied(DecisionReason),
}

impl PreauthResponse {
    /// Envelope around the field frame `("token", token bytes)` or
    /// `("denied", reason)`.
    pub fn to_wire(&self) -> Vec<u8> {
        let fields: [Vec<u8>; 2] = match self {
            PreauthResponse::Token(t) => [b"token".to_vec(), t.to_bytes()],
            PreauthResponse::Denied(r) => [b"denied".to_vec(), r.as_str().as_bytes().to_vec()],
        };
        let payload = wire::encode_fields(&fields).expect("response fits one frame");
        wire::encode_envelope(MessageType::PreauthResponse, &payload)
    }

    pub fn from_wire(bytes: &[u8]) -> Result<Self, ProtocolError> {
        let (kind, payload) = wire::decode_envelope(bytes)?;
        if kind != MessageType::PreauthResponse {
            return Err(ProtocolError::UnexpectedMessage { expected: MessageType::PreauthResponse, found: kind });
        }
        let fields = wire::decode_fields(payload)?;
        let [status, body] = fields[..] else {
            return Err(WireError::FieldCount { expected: 2, found: fields.len() }.into());
        };
        match status {
            b"token" => Ok(PreauthResponse::Token(OneTimeToken::from_bytes(body)?)),
            b"denied" => std::str::from_utf8(body)
                .ok()
                .and_then(DecisionReason::from_code)
                .filter(|r| *r != DecisionReason::Granted)
                .map(PreauthResponse::Denied)
                .ok_or_else(|| WireError::Malformed(1, "unknown denial reason".into()).into()),
            _ => Err(WireError::Malformed(0, "unknown response status".into()).into()),
        }
    }

    pub fn token(&self) -> Option<&OneTimeToken> {
        match self {
            PreauthResponse::Token(t) => Some(t),
            PreauthResponse::Denied(_) => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PreauthOutcome {
    pub request_bytes: Vec<u8>,
    pub response_bytes: Vec<u8>,
    pub response: PreauthResponse,
    pub evaluation: Evaluation,
}

/// One cross-domain pre-authorization: open a channel, seal the request,
/// let the target evaluate it, and return its signed token or denial.
pub fn preauthorize<R: RngCore + CryptoRng>(
    target: &mut ControlPlane,
    request: &AccessRequest,
    now_ms: u64,
    rng: &mut R,
) -> Result<PreauthOutcome, ProtocolError> {
    let channel = Channel::open(rng)?;
    let request_bytes = seal_request(&channel, request, rng)?;
    let received = open_sealed_request(&channel, &request_bytes)?;
    if received.target_domain != target.id {
        return Err(ProtocolError::WrongDomain { expected: target.id.clone(), found: received.target_domain });
    }
    let evaluation = target.evaluate(&received, now_ms);
    let response = respond(target, &received, &evaluation, rng)?;
    let response_bytes = response.to_wire();
    Ok(PreauthOutcome { request_bytes, response_bytes, response, evaluation })
}

/// Turn the target's decision into a response, issuing a token if allowed.
pub fn respond<R: RngCore>(
    target: &mut ControlPlane,
    request: &AccessRequest,
    evaluation: &Evaluation,
    rng: &mut R,
) -> Result<PreauthResponse, ProtocolError> {
    if !evaluation.decision.allow {
        return Ok(PreauthResponse::Denied(evaluation.decision.reason));
    }
    let secret = &target.am.keys().secret;
    let token = issue_token(secret, &mut target.ledger, &request.device_id, &evaluation.decision, rng)?;
    Ok(PreauthResponse::Token(token))
}

/// Present a token to the domain that issued it.
pub fn redeem(target: &mut ControlPlane, token: &OneTimeToken, request: &AccessRequest, now_ms: u64) -> Result<Grant, TokenDenial> {
    let am_public = target.am.public_key();
    verify_token(&mut target.ledger, &am_public, token, request, now_ms)
}
