//! P-256 key agreement and signatures, AES-256-GCM, and AM-issued certificates.
//!
//! Fixed encodings: public keys are 33-byte SEC1 compressed points,
//! signatures are 64-byte `r || s`, shared keys are 32 bytes.

use std::fmt;

use aes_gcm::aead::{Aead, KeyInit, Payload};
use aes_gcm::{Aes256Gcm, Nonce};
use hkdf::Hkdf;
use p256::ecdsa::signature::hazmat::{PrehashSigner, PrehashVerifier};
use p256::ecdsa::{Signature as EcdsaSignature, SigningKey, VerifyingKey};
use p256::elliptic_curve::rand_core::{CryptoRng, RngCore};
use p256::elliptic_curve::sec1::ToEncodedPoint;
use p256::elliptic_curve::Group;
use p256::{ProjectivePoint, Scalar, SecretKey};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::metrics::{charge, Op};
use crate::wire::{self, WireError};

pub const PUBLIC_KEY_LEN: usize = 33;
pub const SIGNATURE_LEN: usize = 64;
pub const SHARED_KEY_LEN: usize = 32;
pub const NONCE_LEN: usize = 12;
pub const TAG_LEN: usize = 16;

const CHANNEL_SALT: &[u8] = b"ztmesh/channel/v1";
const CHANNEL_INFO: &[u8] = b"aes-256-gcm key";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CryptoError {
    #[error("invalid public key")]
    InvalidPublicKey,
    #[error("authentication failure")]
    AuthenticationFailure,
    #[error("nonce must be {NONCE_LEN} bytes, got {0}")]
    InvalidNonce(usize),
    #[error("malformed certificate: {0}")]
    MalformedCertificate(#[from] WireError),
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PublicKey([u8; PUBLIC_KEY_LEN]);

impl PublicKey {
    /// Parse a compressed point. Rejects the identity and off-curve encodings.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        let pk = p256::PublicKey::from_sec1_bytes(bytes).map_err(|_| CryptoError::InvalidPublicKey)?;
        Ok(Self::from_point(&pk))
    }

    fn from_point(pk: &p256::PublicKey) -> Self {
        let enc = pk.to_encoded_point(true);
        let mut out = [0u8; PUBLIC_KEY_LEN];
        out.copy_from_slice(enc.as_bytes());
        PublicKey(out)
    }

    pub fn as_bytes(&self) -> &[u8; PUBLIC_KEY_LEN] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    fn point(&self) -> p256::PublicKey {
        p256::PublicKey::from_sec1_bytes(&self.0).expect("validated at construction")
    }
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({})", self.to_hex())
    }
}

/// Private scalar. Never serialized and redacted from `Debug`.
#[derive(Clone)]
pub struct SecretScalar(SecretKey);

impl fmt::Debug for SecretScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SecretScalar(..)")
    }
}

impl SecretScalar {
    pub fn public_key(&self) -> PublicKey {
        PublicKey::from_point(&self.0.public_key())
    }
}

#[derive(Clone, Debug)]
pub struct KeyPair {
    pub public: PublicKey,
    pub secret: SecretScalar,
}

impl KeyPair {
    fn from_rng<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        let sk = SecretKey::random(rng);
        let public = PublicKey::from_point(&sk.public_key());
        KeyPair { public, secret: SecretScalar(sk) }
    }
}

fn with_seeded<T>(seed: Option<u64>, f: impl FnOnce(&mut ChaCha20Rng) -> T) -> T {
    let mut rng = match seed {
        Some(s) => ChaCha20Rng::seed_from_u64(s),
        None => ChaCha20Rng::from_entropy(),
    };
    f(&mut rng)
}

/// Long-term identity keypair (device or AM). Charges `Exp`.
pub fn generate_keypair(seed: Option<u64>) -> KeyPair {
    with_seeded(seed, generate_keypair_with)
}

pub fn generate_keypair_with<R: RngCore + CryptoRng>(rng: &mut R) -> KeyPair {
    charge(Op::Exp);
    KeyPair::from_rng(rng)
}

/// Keypair for an inter-domain channel. Charges `M`.
pub fn generate_channel_keypair(seed: Option<u64>) -> KeyPair {
    with_seeded(seed, generate_channel_keypair_with)
}

pub fn generate_channel_keypair_with<R: RngCore + CryptoRng>(rng: &mut R) -> KeyPair {
    charge(Op::ScalarMul);
    KeyPair::from_rng(rng)
}

/// Parse and group-check a public key received from a device. Charges `Exp`.
pub fn validate_public_key(bytes: &[u8]) -> Result<PublicKey, CryptoError> {
    charge(Op::Exp);
    let pk = PublicKey::from_bytes(bytes)?;
    // [n-1]P + P must be the identity for a point of prime order n.
    let p = pk.point().to_projective();
    let check = p * (Scalar::ZERO - Scalar::ONE) + p;
    if !bool::from(check.is_identity()) || p == ProjectivePoint::IDENTITY {
        return Err(CryptoError::InvalidPublicKey);
    }
    Ok(pk)
}

#[derive(Clone, PartialEq, Eq)]
pub struct SharedKey([u8; SHARED_KEY_LEN]);

impl SharedKey {
    pub fn from_bytes(bytes: [u8; SHARED_KEY_LEN]) -> Self {
        SharedKey(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; SHARED_KEY_LEN] {
        &self.0
    }
}

impl fmt::Debug for SharedKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SharedKey(..)")
    }
}

/// ECDH followed by HKDF-SHA256. Charges `M`.
pub fn derive_shared_key(my_private: &SecretScalar, their_public: &PublicKey) -> SharedKey {
    charge(Op::ScalarMul);
    let shared = p256::ecdh::diffie_hellman(my_private.0.to_nonzero_scalar(), their_public.point().as_affine());
    let hk = Hkdf::<Sha256>::new(Some(CHANNEL_SALT), shared.raw_secret_bytes());
    let mut okm = [0u8; SHARED_KEY_LEN];
    hk.expand(CHANNEL_INFO, &mut okm).expect("32 bytes is a valid HKDF length");
    SharedKey(okm)
}

/// Like [`derive_shared_key`] but takes the peer key as raw bytes.
pub fn derive_shared_key_from_bytes(my_private: &SecretScalar, their_public: &[u8]) -> Result<SharedKey, CryptoError> {
    let pk = PublicKey::from_bytes(their_public)?;
    Ok(derive_shared_key(my_private, &pk))
}

pub fn random_nonce<R: RngCore>(rng: &mut R) -> [u8; NONCE_LEN] {
    let mut n = [0u8; NONCE_LEN];
    rng.fill_bytes(&mut n);
    n
}

/// AES-256-GCM. Output is `nonce || ciphertext || tag`. Charges `CS`.
pub fn encrypt(key: &SharedKey, plaintext: &[u8], nonce: &[u8], aad: &[u8]) -> Result<Vec<u8>, CryptoError> {
    if nonce.len() != NONCE_LEN {
        return Err(CryptoError::InvalidNonce(nonce.len()));
    }
    let n: [u8; NONCE_LEN] = nonce.try_into().expect("length checked");
    charge(Op::Symmetric);
    let cipher = Aes256Gcm::new_from_slice(&key.0).expect("32-byte key");
    let ct = cipher
        .encrypt(&Nonce::from(n), Payload { msg: plaintext, aad })
        .map_err(|_| CryptoError::AuthenticationFailure)?;
    let mut out = Vec::with_capacity(NONCE_LEN + ct.len());
    out.extend_from_slice(nonce);
    out.extend_from_slice(&ct);
    Ok(out)
}

/// Inverse of [`encrypt`]. Any tampering or a wrong key is an
/// `AuthenticationFailure`. Charges `CS`.
pub fn decrypt(key: &SharedKey, sealed: &[u8], aad: &[u8]) -> Result<Vec<u8>, CryptoError> {
    if sealed.len() < NONCE_LEN + TAG_LEN {
        return Err(CryptoError::AuthenticationFailure);
    }
    charge(Op::Symmetric);
    let (nonce, ct) = sealed.split_at(NONCE_LEN);
    let n: [u8; NONCE_LEN] = nonce.try_into().expect("split at nonce length");
    let cipher = Aes256Gcm::new_from_slice(&key.0).expect("32-byte key");
    cipher
        .decrypt(&Nonce::from(n), Payload { msg: ct, aad })
        .map_err(|_| CryptoError::AuthenticationFailure)
}

/// SHA-256. Charges `H`.
pub fn digest(message: &[u8]) -> [u8; 32] {
    charge(Op::Hash);
    Sha256::digest(message).into()
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Signature([u8; SIGNATURE_LEN]);

impl Signature {
    pub fn from_bytes(bytes: &[u8]) -> Option<Self> {
        <[u8; SIGNATURE_LEN]>::try_from(bytes).ok().map(Signature)
    }

    pub fn as_bytes(&self) -> &[u8; SIGNATURE_LEN] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({})", self.to_hex())
    }
}

/// Deterministic ECDSA over SHA-256. Charges `H + Sig`.
pub fn sign(private_key: &SecretScalar, message: &[u8]) -> Signature {
    let prehash = digest(message);
    charge(Op::Sig);
    let sk = SigningKey::from(&private_key.0);
    let sig: EcdsaSignature = sk.sign_prehash(&prehash).expect("32-byte prehash");
    let mut out = [0u8; SIGNATURE_LEN];
    out.copy_from_slice(&sig.to_bytes());
    Signature(out)
}

/// Charges `H + Exp`. Malformed signature bytes verify as `false`.
pub fn verify(public_key: &PublicKey, message: &[u8], signature: &[u8]) -> bool {
    let prehash = digest(message);
    charge(Op::Exp);
    let Ok(sig) = EcdsaSignature::from_slice(signature) else {
        return false;
    };
    let vk = VerifyingKey::from(public_key.point());
    vk.verify_prehash(&prehash, &sig).is_ok()
}

/// A device public key bound to its id by the issuing AM's signature.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Certificate {
    pub device_id: String,
    pub device_public_key: PublicKey,
    pub issuer_id: String,
    pub am_signature: Signature,
}

impl Certificate {
    /// The signed bytes: a field frame of (device_id, public key, issuer_id).
    pub fn signed_payload(device_id: &str, device_public_key: &PublicKey, issuer_id: &str) -> Vec<u8> {
        wire::encode_fields(&[device_id.as_bytes(), device_public_key.as_bytes(), issuer_id.as_bytes()])
            .expect("certificate fields are bounded")
    }

    pub fn issue(am_secret: &SecretScalar, issuer_id: &str, device_id: &str, device_public_key: PublicKey) -> Self {
        let payload = Self::signed_payload(device_id, &device_public_key, issuer_id);
        let am_signature = sign(am_secret, &payload);
        Certificate { device_id: device_id.to_string(), device_public_key, issuer_id: issuer_id.to_string(), am_signature }
    }

    /// Charges `Exp + H`.
    pub fn verify(&self, am_public: &PublicKey) -> bool {
        let payload = Self::signed_payload(&self.device_id, &self.device_public_key, &self.issuer_id);
        verify(am_public, &payload, self.am_signature.as_bytes())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        wire::encode_fields(&[
            self.device_id.as_bytes(),
            self.device_public_key.as_bytes(),
            self.issuer_id.as_bytes(),
            self.am_signature.as_bytes(),
        ])
        .expect("certificate fields are bounded")
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        let f = wire::decode_fields(bytes)?;
        if f.len() != 4 {
            return Err(WireError::FieldCount { expected: 4, found: f.len() }.into());
        }
        let text = |i: usize| std::str::from_utf8(f[i]).map(str::to_string).map_err(|_| WireError::NotUtf8(i));
        let device_public_key = PublicKey::from_bytes(f[1])?;
        let am_signature = Signature::from_bytes(f[3]).ok_or_else(|| WireError::Malformed(3, "signature length".into()))?;
        Ok(Certificate { device_id: text(0)?, device_public_key, issuer_id: text(2)?, am_signature })
    }
}
