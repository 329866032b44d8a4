use crate::control_plane::{AccessLevel, AccessRequest};
use crate::crypto::Certificate;
use crate::wire::{self, WireError};

use super::ProtocolError;

pub const REQUEST_FIELDS: usize = 6;

/// Field frame of (certificate, device_id, target_domain, resource,
/// access_level, access_intention). The certificate travels as the lowercase
/// hex of its own field frame.
pub fn serialize_request(request: &AccessRequest) -> Result<Vec<u8>, ProtocolError> {
    request.validate()?;
    let cert = hex::encode(request.certificate.to_bytes());
    Ok(wire::encode_fields(&[
        cert.as_bytes(),
        request.device_id.as_bytes(),
        request.target_domain.as_bytes(),
        request.resource.as_bytes(),
        request.access_level.as_str().as_bytes(),
        request.access_intention.as_bytes(),
    ])?)
}

pub fn deserialize_request(bytes: &[u8]) -> Result<AccessRequest, ProtocolError> {
    let f = wire::decode_text_fields(bytes, REQUEST_FIELDS)?;
    let cert_bytes = hex::decode(f[0]).map_err(|e| WireError::Malformed(0, e.to_string()))?;
    let request = AccessRequest {
        certificate: Certificate::from_bytes(&cert_bytes)?,
        device_id: f[1].to_string(),
        target_domain: f[2].to_string(),
        resource: f[3].to_string(),
        access_level: f[4].parse::<AccessLevel>()?,
        access_intention: f[5].to_string(),
    };
    request.validate()?;
    Ok(request)
}
