use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::RngCore;

use super::ProtocolError;
use crate::control_plane::{AccessRequest, AuthorizationDecision, TimeRange};
use crate::crypto::{self, PublicKey, SecretScalar, Signature};
use crate::wire::{self, WireError};

pub const TOKEN_NONCE_LEN: usize = 16;
pub type TokenNonce = [u8; TOKEN_NONCE_LEN];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OneTimeToken {
    pub device_id: String,
    pub scope: BTreeSet<String>,
    pub time_range: TimeRange,
    pub intention: String,
    pub nonce: TokenNonce,
    pub signature: Signature,
}

impl OneTimeToken {
    /// Field frame of (device_id, scope joined by `\n`, start_ms, end_ms,
    /// intention, nonce hex), with the times in decimal.
    pub fn signed_payload(&self) -> Vec<u8> {
        let fields = self.text_fields();
        wire::encode_fields(&fields).expect("token fields are bounded")
    }

    fn text_fields(&self) -> Vec<String> {
        vec![
            self.device_id.clone(),
            self.scope.iter().cloned().collect::<Vec<_>>().join("\n"),
            self.time_range.start_ms.to_string(),
            self.time_range.end_ms.to_string(),
            self.intention.clone(),
            hex::encode(self.nonce),
        ]
    }

    /// The signed fields followed by the signature hex.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut fields = self.text_fields();
        fields.push(self.signature.to_hex());
        wire::encode_fields(&fields).expect("token fields are bounded")
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, WireError> {
        let f = wire::decode_text_fields(bytes, 7)?;
        let num = |i: usize| f[i].parse::<u64>().map_err(|_| WireError::Malformed(i, "not an integer".into()));
        let nonce = hex::decode(f[5])
            .ok()
            .and_then(|v| TokenNonce::try_from(v).ok())
            .ok_or_else(|| WireError::Malformed(5, "nonce".into()))?;
        let signature = hex::decode(f[6])
            .ok()
            .and_then(|v| Signature::from_bytes(&v))
            .ok_or_else(|| WireError::Malformed(6, "signature".into()))?;
        let scope = if f[1].is_empty() { BTreeSet::new() } else { f[1].split('\n').map(str::to_string).collect() };
        Ok(OneTimeToken {
            device_id: f[0].to_string(),
            scope,
            time_range: TimeRange { start_ms: num(2)?, end_ms: num(3)? },
            intention: f[4].to_string(),
            nonce,
            signature,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IssuanceRecord {
    pub device_id: String,
    pub issued_at_ms: u64,
}

/// Nonces this domain has issued and the subset already redeemed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenLedger {
    issued: BTreeMap<TokenNonce, IssuanceRecord>,
    used: BTreeSet<TokenNonce>,
}

impl TokenLedger {
    pub fn issued_count(&self) -> usize {
        self.issued.len()
    }

    pub fn used_count(&self) -> usize {
        self.used.len()
    }

    pub fn is_issued(&self, nonce: &TokenNonce) -> bool {
        self.issued.contains_key(nonce)
    }

    pub fn is_used(&self, nonce: &TokenNonce) -> bool {
        self.used.contains(nonce)
    }

    /// `used` is a subset of the issued nonces.
    pub fn is_consistent(&self) -> bool {
        self.used.iter().all(|n| self.issued.contains_key(n))
    }
}

/// Sign a token for an allowed decision. Charges `H + Sig`.
pub fn issue_token<R: RngCore>(
    am_secret: &SecretScalar,
    ledger: &mut TokenLedger,
    device_id: &str,
    decision: &AuthorizationDecision,
    rng: &mut R,
) -> Result<OneTimeToken, ProtocolError> {
    if !decision.allow {
        return Err(ProtocolError::NotAllowed(decision.reason));
    }
    let mut nonce = [0u8; TOKEN_NONCE_LEN];
    loop {
        rng.fill_bytes(&mut nonce);
        if !ledger.issued.contains_key(&nonce) {
            break;
        }
    }
    let mut token = OneTimeToken {
        device_id: device_id.to_string(),
        scope: decision.scope.clone(),
        time_range: decision.time_range,
        intention: decision.intention.clone(),
        nonce,
        signature: Signature::from_bytes(&[0u8; crypto::SIGNATURE_LEN]).expect("fixed length"),
    };
    token.signature = crypto::sign(am_secret, &token.signed_payload());
    ledger.issued.insert(nonce, IssuanceRecord { device_id: device_id.to_string(), issued_at_ms: decision.time_range.start_ms });
    Ok(token)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenDenial {
    Signature,
    Expired,
    Scope,
    Intention,
    Replay,
}

impl TokenDenial {
    pub fn as_str(self) -> &'static str {
        match self {
            TokenDenial::Signature => "signature",
            TokenDenial::Expired => "expired",
            TokenDenial::Scope => "scope",
            TokenDenial::Intention => "intention",
            TokenDenial::Replay => "replay",
        }
    }
}

impl fmt::Display for TokenDenial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grant {
    pub device_id: String,
    pub resource: String,
    pub nonce: TokenNonce,
}

/// Signature, validity window, scope, intention and single use, in that
/// order. A grant marks the nonce used before returning. Charges `Exp + H`.
pub fn verify_token(
    ledger: &mut TokenLedger,
    am_public: &PublicKey,
    token: &OneTimeToken,
    presented: &AccessRequest,
    now_ms: u64,
) -> Result<Grant, TokenDenial> {
    if !crypto::verify(am_public, &token.signed_payload(), token.signature.as_bytes()) {
        return Err(TokenDenial::Signature);
    }
    if !token.time_range.contains(now_ms) {
        return Err(TokenDenial::Expired);
    }
    if !token.scope.contains(&presented.resource) {
        return Err(TokenDenial::Scope);
    }
    if presented.access_intention.trim() != token.intention.trim() {
        return Err(TokenDenial::Intention);
    }
    if !ledger.issued.contains_key(&token.nonce) || !ledger.used.insert(token.nonce) {
        return Err(TokenDenial::Replay);
    }
    Ok(Grant { device_id: token.device_id.clone(), resource: presented.resource.clone(), nonce: token.nonce })
}
