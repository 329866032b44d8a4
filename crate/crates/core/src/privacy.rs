//! The closed set of messages that cross a domain boundary, with a schema
//! every one of them exposes.
//!
//! Only types implementing [`WireSafe`] may appear in a wire message. The
//! `wire_record!` expansion destructures each struct exhaustively, so adding
//! a field without listing it here fails to compile. Raw device context
//! ([`DeviceContextRecord`](crate::control_plane::DeviceContextRecord))
//! deliberately has no implementation.

use std::collections::BTreeSet;

use crate::control_plane::{DecisionReason, TimeRange};
use crate::crypto::Signature;
use crate::dfl::{RoundMessage, SparseLayer, SparseUpdate};
use crate::protocol::{OneTimeToken, PreauthResponse, ProtocolError, TokenNonce};
use crate::wire::{self, MessageType};

/// Shape of a wire type: a leaf or a record or variant set of named parts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Schema {
    Leaf(&'static str),
    Sequence(Box<Schema>),
    Record(&'static str, Vec<(&'static str, Schema)>),
    Variants(&'static str, Vec<(&'static str, Schema)>),
}

impl Schema {
    pub fn name(&self) -> String {
        match self {
            Schema::Leaf(n) | Schema::Record(n, _) | Schema::Variants(n, _) => n.to_string(),
            Schema::Sequence(inner) => format!("[{}]", inner.name()),
        }
    }

    /// Every type name reachable from this schema, itself included.
    pub fn reachable(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.walk(&mut out);
        out
    }

    fn walk(&self, out: &mut BTreeSet<String>) {
        match self {
            Schema::Leaf(n) => {
                out.insert(n.to_string());
            }
            Schema::Sequence(inner) => inner.walk(out),
            Schema::Record(n, parts) | Schema::Variants(n, parts) => {
                out.insert(n.to_string());
                parts.iter().for_each(|(_, s)| s.walk(out));
            }
        }
    }

    /// Top-level part names of a record or variant set.
    pub fn parts(&self) -> Vec<&'static str> {
        match self {
            Schema::Record(_, parts) | Schema::Variants(_, parts) => parts.iter().map(|(n, _)| *n).collect(),
            _ => Vec::new(),
        }
    }
}

/// A type allowed to travel between domains.
pub trait WireSafe {
    fn schema() -> Schema;
}

macro_rules! wire_leaf {
    ($($t:ty => $name:literal),* $(,)?) => {
        $(impl WireSafe for $t {
            fn schema() -> Schema {
                Schema::Leaf($name)
            }
        })*
    };
}

macro_rules! wire_record {
    ($t:ident { $($field:ident : $ty:ty),* $(,)? }) => {
        impl WireSafe for $t {
            fn schema() -> Schema {
                #[allow(dead_code)]
                fn exhaustive(v: &$t) {
                    let $t { $($field),* } = v;
                    $(let _: &$ty = $field;)*
                }
                Schema::Record(stringify!($t), vec![$((stringify!($field), <$ty as WireSafe>::schema())),*])
            }
        }
    };
}

wire_leaf! {
    u8 => "u8",
    u32 => "u32",
    u64 => "u64",
    usize => "u32",
    f64 => "f64",
    String => "utf8",
    TokenNonce => "nonce16",
    Signature => "signature64",
    DecisionReason => "DecisionReason",
}

impl<T: WireSafe> WireSafe for Vec<T> {
    fn schema() -> Schema {
        Schema::Sequence(Box::new(T::schema()))
    }
}

impl<T: WireSafe> WireSafe for BTreeSet<T> {
    fn schema() -> Schema {
        Schema::Sequence(Box::new(T::schema()))
    }
}

impl<A: WireSafe, B: WireSafe> WireSafe for (A, B) {
    fn schema() -> Schema {
        Schema::Record("pair", vec![("0", A::schema()), ("1", B::schema())])
    }
}

/// AEAD output: nonce, ciphertext and tag. Opaque to anyone without the
/// channel key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ciphertext(pub Vec<u8>);

impl WireSafe for Ciphertext {
    fn schema() -> Schema {
        Schema::Leaf("ciphertext")
    }
}

wire_record!(SparseLayer { len: usize, entries: Vec<(u32, f64)> });
wire_record!(SparseUpdate { k_top: usize, layers: Vec<SparseLayer> });
wire_record!(RoundMessage { update: SparseUpdate, f1: f64, class_distribution: Vec<f64> });
wire_record!(TimeRange { start_ms: u64, end_ms: u64 });
wire_record!(OneTimeToken {
    device_id: String,
    scope: BTreeSet<String>,
    time_range: TimeRange,
    intention: String,
    nonce: TokenNonce,
    signature: Signature,
});

impl WireSafe for PreauthResponse {
    fn schema() -> Schema {
        #[allow(dead_code)]
        fn exhaustive(v: &PreauthResponse) {
            match v {
                PreauthResponse::Token(t) => {
                    let _: &OneTimeToken = t;
                }
                PreauthResponse::Denied(r) => {
                    let _: &DecisionReason = r;
                }
            }
        }
        Schema::Variants(
            "PreauthResponse",
            vec![("Token", OneTimeToken::schema()), ("Denied", DecisionReason::schema())],
        )
    }
}

/// Every message a domain can send to another.
#[derive(Debug, Clone, PartialEq)]
pub enum WireMessage {
    SealedRequest(Ciphertext),
    RoundUpdate(RoundMessage),
    PreauthResponse(PreauthResponse),
}

impl WireSafe for WireMessage {
    fn schema() -> Schema {
        #[allow(dead_code)]
        fn exhaustive(v: &WireMessage) {
            match v {
                WireMessage::SealedRequest(c) => {
                    let _: &Ciphertext = c;
                }
                WireMessage::RoundUpdate(m) => {
                    let _: &RoundMessage = m;
                }
                WireMessage::PreauthResponse(r) => {
                    let _: &PreauthResponse = r;
                }
            }
        }
        Schema::Variants(
            "WireMessage",
            vec![
                ("SealedRequest", Ciphertext::schema()),
                ("RoundUpdate", RoundMessage::schema()),
                ("PreauthResponse", PreauthResponse::schema()),
            ],
        )
    }
}

impl WireMessage {
    pub fn kind(&self) -> MessageType {
        match self {
            WireMessage::SealedRequest(_) => MessageType::SealedRequest,
            WireMessage::RoundUpdate(_) => MessageType::RoundUpdate,
            WireMessage::PreauthResponse(_) => MessageType::PreauthResponse,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        match self {
            WireMessage::SealedRequest(c) => wire::encode_envelope(MessageType::SealedRequest, &c.0),
            WireMessage::RoundUpdate(m) => m.to_wire(),
            WireMessage::PreauthResponse(r) => r.to_wire(),
        }
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, ProtocolError> {
        let (kind, payload) = wire::decode_envelope(bytes)?;
        Ok(match kind {
            MessageType::SealedRequest => WireMessage::SealedRequest(Ciphertext(payload.to_vec())),
            MessageType::RoundUpdate => WireMessage::RoundUpdate(RoundMessage::from_wire(bytes)?),
            MessageType::PreauthResponse => WireMessage::PreauthResponse(PreauthResponse::from_wire(bytes)?),
        })
    }
}
