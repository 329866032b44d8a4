//! Cross-domain pre-authorization: request framing, the AEAD channel and
//! one-time tokens.

pub mod channel;
pub mod preauth;
pub mod serialize;
pub mod token;

use thiserror::Error;

pub use channel::{establish_channel, Channel};
pub use preauth::{open_sealed_request, preauthorize, redeem, respond, seal_request, PreauthOutcome, PreauthResponse};
pub use serialize::{deserialize_request, serialize_request, REQUEST_FIELDS};
pub use token::{issue_token, verify_token, Grant, OneTimeToken, TokenDenial, TokenLedger, TokenNonce, TOKEN_NONCE_LEN};

use crate::control_plane::{DecisionReason, RequestError};
use crate::crypto::CryptoError;
use crate::wire::{MessageType, WireError};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProtocolError {
    #[error(transparent)]
    Request(#[from] RequestError),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error("expected a {expected:?} message, got {found:?}")]
    UnexpectedMessage { expected: MessageType, found: MessageType },
    #[error("request addressed to `{found}`, not `{expected}`")]
    WrongDomain { expected: String, found: String },
    #[error("no token for a denied request ({0})")]
    NotAllowed(DecisionReason),
    #[error("channel endpoints derived different keys")]
    KeyAgreement,
    #[error("{0}")]
    Inconsistent(String),
}
