use rand::{CryptoRng, RngCore};

use super::ProtocolError;
use crate::crypto::{self, KeyPair, SharedKey};
use crate::wire::{self, MessageType};

/// Each side's view of the key agreement. Charges `2M`.
pub fn establish_channel(a: &KeyPair, b: &KeyPair) -> (SharedKey, SharedKey) {
    let ka = crypto::derive_shared_key(&a.secret, &b.public);
    let kb = crypto::derive_shared_key(&b.secret, &a.public);
    (ka, kb)
}

/// An AEAD channel between a source and a target domain.
#[derive(Debug, Clone)]
pub struct Channel {
    key: SharedKey,
}

impl Channel {
    /// Fresh ephemeral keys on both ends and one derivation per end. Charges `4M`.
    pub fn open<R: RngCore + CryptoRng>(rng: &mut R) -> Result<Channel, ProtocolError> {
        let source = crypto::generate_channel_keypair_with(rng);
        let target = crypto::generate_channel_keypair_with(rng);
        let (ks, kt) = establish_channel(&source, &target);
        if ks != kt {
            return Err(ProtocolError::KeyAgreement);
        }
        Ok(Channel { key: ks })
    }

    pub fn from_key(key: SharedKey) -> Self {
        Channel { key }
    }

    pub fn key(&self) -> &SharedKey {
        &self.key
    }

    /// Envelope whose payload is `nonce || ciphertext || tag`; the header's
    /// first two bytes are the associated data. Charges `CS`.
    pub fn seal<R: RngCore>(&self, kind: MessageType, plaintext: &[u8], rng: &mut R) -> Result<Vec<u8>, ProtocolError> {
        let nonce = crypto::random_nonce(rng);
        let sealed = crypto::encrypt(&self.key, plaintext, &nonce, &wire::header_prefix(kind))?;
        Ok(wire::encode_envelope(kind, &sealed))
    }

    /// Charges `CS`.
    pub fn unseal(&self, expected: MessageType, envelope: &[u8]) -> Result<Vec<u8>, ProtocolError> {
        let (kind, payload) = wire::decode_envelope(envelope)?;
        if kind != expected {
            return Err(ProtocolError::UnexpectedMessage { expected, found: kind });
        }
        Ok(crypto::decrypt(&self.key, payload, &wire::header_prefix(kind))?)
    }
}
