use std::collections::BTreeMap;

use thiserror::Error;

use super::request::AccessRequest;
use crate::crypto::{self, Certificate, CryptoError, KeyPair, PublicKey};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AmError {
    #[error("device `{0}` is already registered")]
    DuplicateId(String),
    #[error("device id must not be empty")]
    EmptyId,
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}

/// How an authenticated device relates to this domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeviceOrigin {
    /// Registered with this domain's AM.
    Local,
    /// Certified by a trusted peer AM.
    Foreign,
    Unknown,
}

/// Authentication module: issues certificates and checks them.
#[derive(Debug, Clone)]
pub struct AuthenticationModule {
    pub domain_id: String,
    keys: KeyPair,
    registry: BTreeMap<String, Certificate>,
    trusted_issuers: BTreeMap<String, PublicKey>,
}

impl AuthenticationModule {
    pub fn new(domain_id: impl Into<String>, keys: KeyPair) -> Self {
        AuthenticationModule {
            domain_id: domain_id.into(),
            keys,
            registry: BTreeMap::new(),
            trusted_issuers: BTreeMap::new(),
        }
    }

    pub fn public_key(&self) -> PublicKey {
        self.keys.public
    }

    pub(crate) fn keys(&self) -> &KeyPair {
        &self.keys
    }

    /// Accept certificates issued by a peer domain's AM.
    pub fn trust_issuer(&mut self, issuer_id: impl Into<String>, public_key: PublicKey) {
        self.trusted_issuers.insert(issuer_id.into(), public_key);
    }

    pub fn issuer_key(&self, issuer_id: &str) -> Option<PublicKey> {
        if issuer_id == self.domain_id {
            Some(self.keys.public)
        } else {
            self.trusted_issuers.get(issuer_id).copied()
        }
    }

    /// Validate the device's key and sign a certificate for it. Charges `Exp + H + Sig`.
    pub fn register_device(&mut self, device_public_key: &[u8], device_id: &str) -> Result<Certificate, AmError> {
        if device_id.is_empty() {
            return Err(AmError::EmptyId);
        }
        if self.registry.contains_key(device_id) {
            return Err(AmError::DuplicateId(device_id.to_string()));
        }
        let pk = crypto::validate_public_key(device_public_key)?;
        let cert = Certificate::issue(&self.keys.secret, &self.domain_id, device_id, pk);
        self.registry.insert(device_id.to_string(), cert.clone());
        Ok(cert)
    }

    pub fn is_registered(&self, device_id: &str) -> bool {
        self.registry.contains_key(device_id)
    }

    pub fn certificate(&self, device_id: &str) -> Option<&Certificate> {
        self.registry.get(device_id)
    }

    pub fn registered_count(&self) -> usize {
        self.registry.len()
    }

    pub fn origin_of(&self, request: &AccessRequest) -> DeviceOrigin {
        let cert = &request.certificate;
        if cert.issuer_id == self.domain_id {
            if self.registry.get(&cert.device_id) == Some(cert) {
                DeviceOrigin::Local
            } else {
                DeviceOrigin::Unknown
            }
        } else if self.trusted_issuers.contains_key(&cert.issuer_id) {
            DeviceOrigin::Foreign
        } else {
            DeviceOrigin::Unknown
        }
    }

    /// Signature check plus registration check. Charges `Exp + H` whenever the
    /// issuer is known.
    pub fn authenticate(&self, request: &AccessRequest) -> bool {
        let cert = &request.certificate;
        let Some(issuer) = self.issuer_key(&cert.issuer_id) else {
            return false;
        };
        let signature_ok = cert.verify(&issuer);
        signature_ok && request.device_id == cert.device_id && self.origin_of(request) != DeviceOrigin::Unknown
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control_plane::request::AccessLevel;
    use crate::metrics::{measure, OpCounters};

    fn am() -> AuthenticationModule {
        AuthenticationModule::new("a", crypto::generate_keypair(Some(1)))
    }

    #[test]
    fn registration_issues_verifiable_certificate() {
        let mut am = am();
        let dev = crypto::generate_keypair(Some(2));
        let (cert, c) = measure("register", || am.register_device(dev.public.as_bytes(), "dev-a").unwrap());
        assert!(cert.verify(&am.public_key()));
        assert_eq!(c, OpCounters { exp: 1, h: 1, sig: 1, ..OpCounters::ZERO });
        assert_eq!(am.register_device(dev.public.as_bytes(), "dev-a"), Err(AmError::DuplicateId("dev-a".into())));
    }

    #[test]
    fn authentication_branches() {
        let mut am = am();
        let dev = crypto::generate_keypair(Some(2));
        let cert = am.register_device(dev.public.as_bytes(), "dev-a").unwrap();
        let req = AccessRequest::new(cert.clone(), "a", "r", AccessLevel::Read, "x").unwrap();
        let (ok, c) = measure("auth", || am.authenticate(&req));
        assert!(ok);
        assert_eq!(c, OpCounters { exp: 1, h: 1, ..OpCounters::ZERO });

        let mut tampered = req.clone();
        tampered.certificate.am_signature = crypto::sign(&dev.secret, b"other");
        assert!(!am.authenticate(&tampered));

        // Validly signed but never stored.
        let other = Certificate::issue(&am.keys().secret, "a", "dev-z", dev.public);
        let unregistered = AccessRequest::new(other, "a", "r", AccessLevel::Read, "x").unwrap();
        assert!(!am.authenticate(&unregistered));
    }
}
