//! Byte framing shared by every message that crosses a domain boundary.
//!
//! Field framing (requests, tokens, certificates):
//!
//! ```text
//! version: u8 = 0x01 | field_count: u8 | { len: u16 BE | value: len bytes } * field_count
//! ```
//!
//! Envelope (everything sent between domains):
//!
//! ```text
//! version: u8 = 0x01 | message_type: u8 | payload_len: u32 BE | payload
//! ```
//!
//! See `docs/wire.md` for the per-message payload layouts.

use thiserror::Error;

pub const WIRE_VERSION: u8 = 0x01;
/// Largest encoded field frame.
pub const MAX_FRAME_LEN: usize = 64 * 1024 - 1;
pub const ENVELOPE_HEADER_LEN: usize = 6;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WireError {
    #[error("unsupported wire version {0:#04x}")]
    Version(u8),
    #[error("unknown message type {0:#04x}")]
    MessageType(u8),
    #[error("truncated input")]
    Truncated,
    #[error("{0} trailing bytes")]
    Trailing(usize),
    #[error("field {0} is {1} bytes, limit is 65535")]
    FieldTooLong(usize, usize),
    #[error("{0} fields, limit is 255")]
    TooManyFields(usize),
    #[error("expected {expected} fields, found {found}")]
    FieldCount { expected: usize, found: usize },
    #[error("frame is {0} bytes, limit is {MAX_FRAME_LEN}")]
    FrameTooLong(usize),
    #[error("field {0} is not UTF-8")]
    NotUtf8(usize),
    #[error("malformed field {0}: {1}")]
    Malformed(usize, String),
}

/// Encode length-prefixed fields.
pub fn encode_fields<T: AsRef<[u8]>>(fields: &[T]) -> Result<Vec<u8>, WireError> {
    if fields.len() > u8::MAX as usize {
        return Err(WireError::TooManyFields(fields.len()));
    }
    let total = 2 + fields.iter().map(|f| 2 + f.as_ref().len()).sum::<usize>();
    if total > MAX_FRAME_LEN {
        return Err(WireError::FrameTooLong(total));
    }
    let mut out = Vec::with_capacity(total);
    out.push(WIRE_VERSION);
    out.push(fields.len() as u8);
    for (i, f) in fields.iter().enumerate() {
        let f = f.as_ref();
        let len = u16::try_from(f.len()).map_err(|_| WireError::FieldTooLong(i, f.len()))?;
        out.extend_from_slice(&len.to_be_bytes());
        out.extend_from_slice(f);
    }
    Ok(out)
}

/// Decode a frame produced by [`encode_fields`], borrowing from `bytes`.
pub fn decode_fields(bytes: &[u8]) -> Result<Vec<&[u8]>, WireError> {
    let mut r = Reader::new(bytes);
    let version = r.u8()?;
    if version != WIRE_VERSION {
        return Err(WireError::Version(version));
    }
    let count = r.u8()? as usize;
    let mut fields = Vec::with_capacity(count);
    for _ in 0..count {
        let len = r.u16()? as usize;
        fields.push(r.take(len)?);
    }
    r.finish()?;
    Ok(fields)
}

/// Decode a frame that must hold exactly `expected` UTF-8 fields.
pub fn decode_text_fields(bytes: &[u8], expected: usize) -> Result<Vec<&str>, WireError> {
    let fields = decode_fields(bytes)?;
    if fields.len() != expected {
        return Err(WireError::FieldCount { expected, found: fields.len() });
    }
    fields
        .into_iter()
        .enumerate()
        .map(|(i, f)| std::str::from_utf8(f).map_err(|_| WireError::NotUtf8(i)))
        .collect()
}

/// Message kinds that travel between domains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MessageType {
    /// AEAD nonce followed by the sealed serialized access request.
    SealedRequest = 0x01,
    /// DFL round message: sparse model, F1, class distribution.
    RoundUpdate = 0x02,
    /// Pre-authorization outcome: a signed one-time token or a denial.
    PreauthResponse = 0x03,
}

impl TryFrom<u8> for MessageType {
    type Error = WireError;
    fn try_from(b: u8) -> Result<Self, WireError> {
        match b {
            0x01 => Ok(MessageType::SealedRequest),
            0x02 => Ok(MessageType::RoundUpdate),
            0x03 => Ok(MessageType::PreauthResponse),
            other => Err(WireError::MessageType(other)),
        }
    }
}

/// The two header bytes that precede the length; used as AEAD associated data.
pub fn header_prefix(kind: MessageType) -> [u8; 2] {
    [WIRE_VERSION, kind as u8]
}

pub fn encode_envelope(kind: MessageType, payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(ENVELOPE_HEADER_LEN + payload.len());
    out.extend_from_slice(&header_prefix(kind));
    out.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    out.extend_from_slice(payload);
    out
}

pub fn decode_envelope(bytes: &[u8]) -> Result<(MessageType, &[u8]), WireError> {
    let mut r = Reader::new(bytes);
    let version = r.u8()?;
    if version != WIRE_VERSION {
        return Err(WireError::Version(version));
    }
    let kind = MessageType::try_from(r.u8()?)?;
    let len = r.u32()? as usize;
    let payload = r.take(len)?;
    r.finish()?;
    Ok((kind, payload))
}

/// Big-endian cursor over a byte slice.
pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        let end = self.pos.checked_add(n).ok_or(WireError::Truncated)?;
        let s = self.buf.get(self.pos..end).ok_or(WireError::Truncated)?;
        self.pos = end;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8, WireError> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16, WireError> {
        Ok(u16::from_be_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    pub fn u32(&mut self) -> Result<u32, WireError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    pub fn f64(&mut self) -> Result<f64, WireError> {
        Ok(f64::from_be_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn finish(self) -> Result<(), WireError> {
        match self.remaining() {
            0 => Ok(()),
            n => Err(WireError::Trailing(n)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_frame_golden_bytes() {
        let bytes = encode_fields(&["ab", "", "c"]).unwrap();
        assert_eq!(bytes, [0x01, 0x03, 0x00, 0x02, b'a', b'b', 0x00, 0x00, 0x00, 0x01, b'c']);
        assert_eq!(decode_fields(&bytes).unwrap(), vec![&b"ab"[..], b"", b"c"]);
    }

    #[test]
    fn envelope_golden_bytes() {
        let bytes = encode_envelope(MessageType::RoundUpdate, &[0xaa, 0xbb]);
        assert_eq!(bytes, [0x01, 0x02, 0x00, 0x00, 0x00, 0x02, 0xaa, 0xbb]);
        assert_eq!(decode_envelope(&bytes).unwrap(), (MessageType::RoundUpdate, &[0xaa, 0xbb][..]));
    }

    #[test]
    fn rejects_truncation_trailing_and_versions() {
        let bytes = encode_fields(&["hello"]).unwrap();
        assert_eq!(decode_fields(&bytes[..bytes.len() - 1]), Err(WireError::Truncated));
        let mut longer = bytes.clone();
        longer.push(0);
        assert_eq!(decode_fields(&longer), Err(WireError::Trailing(1)));
        let mut v2 = bytes;
        v2[0] = 0x02;
        assert_eq!(decode_fields(&v2), Err(WireError::Version(0x02)));
        assert_eq!(decode_envelope(&[0x01, 0x09, 0, 0, 0, 0]), Err(WireError::MessageType(0x09)));
    }

    #[test]
    fn frame_length_is_bounded() {
        let big = vec![0u8; MAX_FRAME_LEN];
        assert!(matches!(encode_fields(&[big]), Err(WireError::FieldTooLong(0, _)) | Err(WireError::FrameTooLong(_))));
    }
}
