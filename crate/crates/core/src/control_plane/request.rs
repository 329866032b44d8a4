use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::Certificate;

pub const MAX_INTENTION_LEN: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccessLevel {
    Read,
    Write,
    Admin,
}

impl AccessLevel {
    pub const ALL: [AccessLevel; 3] = [AccessLevel::Read, AccessLevel::Write, AccessLevel::Admin];

    pub fn as_str(self) -> &'static str {
        match self {
            AccessLevel::Read => "read",
            AccessLevel::Write => "write",
            AccessLevel::Admin => "admin",
        }
    }
}

impl fmt::Display for AccessLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AccessLevel {
    type Err = RequestError;
    fn from_str(s: &str) -> Result<Self, RequestError> {
        match s {
            "read" => Ok(AccessLevel::Read),
            "write" => Ok(AccessLevel::Write),
            "admin" => Ok(AccessLevel::Admin),
            other => Err(RequestError::UnknownAccessLevel(other.to_string())),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RequestError {
    #[error("field `{0}` is empty")]
    EmptyField(&'static str),
    #[error("device id `{request}` does not match certificate id `{certificate}`")]
    IdMismatch { request: String, certificate: String },
    #[error("access intention is {0} bytes, limit is {MAX_INTENTION_LEN}")]
    IntentionTooLong(usize),
    #[error("unknown access level `{0}`")]
    UnknownAccessLevel(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccessRequest {
    pub certificate: Certificate,
    pub device_id: String,
    pub target_domain: String,
    pub resource: String,
    pub access_level: AccessLevel,
    pub access_intention: String,
}

impl AccessRequest {
    pub fn new(
        certificate: Certificate,
        target_domain: impl Into<String>,
        resource: impl Into<String>,
        access_level: AccessLevel,
        access_intention: impl Into<String>,
    ) -> Result<Self, RequestError> {
        let r = AccessRequest {
            device_id: certificate.device_id.clone(),
            certificate,
            target_domain: target_domain.into(),
            resource: resource.into(),
            access_level,
            access_intention: access_intention.into(),
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<(), RequestError> {
        for (name, v) in [
            ("device_id", &self.device_id),
            ("target_domain", &self.target_domain),
            ("resource", &self.resource),
            ("access_intention", &self.access_intention),
        ] {
            if v.is_empty() {
                return Err(RequestError::EmptyField(name));
            }
        }
        if self.access_intention.len() > MAX_INTENTION_LEN {
            return Err(RequestError::IntentionTooLong(self.access_intention.len()));
        }
        if self.device_id != self.certificate.device_id {
            return Err(RequestError::IdMismatch {
                request: self.device_id.clone(),
                certificate: self.certificate.device_id.clone(),
            });
        }
        Ok(())
    }
}

/// Observed context for one device at one instant. Stays inside its domain:
/// it has no wire encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceContextRecord {
    pub device_id: String,
    pub context_class: usize,
    pub feature_vector: Vec<f64>,
    pub timestamp_ms: u64,
}
