//! Round messages and model checkpoints on the wire.

use super::compress::{SparseLayer, SparseUpdate};
use super::model::{Activation, Architecture, ModelParameters};
use super::DflError;
use crate::wire::{self, MessageType, Reader, WireError};

/// Everything one domain tells a neighbour each round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundMessage {
    pub update: SparseUpdate,
    pub f1: f64,
    pub class_distribution: Vec<f64>,
}

impl RoundMessage {
    /// Payload layout (big-endian):
    /// `f1: f64 | classes: u16 | P: f64 * classes | k_top: u32 | layers: u16 |
    ///  { len: u32 | entries: u32 | { index: u32 | value: f64 } * entries } * layers`
    pub fn encode_payload(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&self.f1.to_be_bytes());
        out.extend_from_slice(&(self.class_distribution.len() as u16).to_be_bytes());
        for p in &self.class_distribution {
            out.extend_from_slice(&p.to_be_bytes());
        }
        out.extend_from_slice(&(self.update.k_top as u32).to_be_bytes());
        out.extend_from_slice(&(self.update.layers.len() as u16).to_be_bytes());
        for layer in &self.update.layers {
            out.extend_from_slice(&(layer.len as u32).to_be_bytes());
            out.extend_from_slice(&(layer.entries.len() as u32).to_be_bytes());
            for (i, v) in &layer.entries {
                out.extend_from_slice(&i.to_be_bytes());
                out.extend_from_slice(&v.to_be_bytes());
            }
        }
        out
    }

    pub fn decode_payload(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(bytes);
        let f1 = r.f64()?;
        let classes = r.u16()? as usize;
        let class_distribution = (0..classes).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
        let k_top = r.u32()? as usize;
        let n_layers = r.u16()? as usize;
        let mut layers = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            let len = r.u32()? as usize;
            let n = r.u32()? as usize;
            let mut entries = Vec::with_capacity(n.min(r.remaining() / 12));
            for _ in 0..n {
                entries.push((r.u32()?, r.f64()?));
            }
            layers.push(SparseLayer { len, entries });
        }
        r.finish()?;
        Ok(RoundMessage { update: SparseUpdate { k_top, layers }, f1, class_distribution })
    }

    pub fn to_wire(&self) -> Vec<u8> {
        wire::encode_envelope(MessageType::RoundUpdate, &self.encode_payload())
    }

    pub fn from_wire(bytes: &[u8]) -> Result<Self, WireError> {
        match wire::decode_envelope(bytes)? {
            (MessageType::RoundUpdate, payload) => Self::decode_payload(payload),
            (other, _) => Err(WireError::MessageType(other as u8)),
        }
    }
}

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"ZTCK";
pub const CHECKPOINT_VERSION: u8 = 1;

/// Checkpoint layout (little-endian):
/// `"ZTCK" | version: u8 | n_sizes: u8 | sizes: u32 * n_sizes |
///  activations: u8 * (n_sizes - 1) | params: u64 | values: f64 * params`
pub fn encode_checkpoint(model: &ModelParameters) -> Vec<u8> {
    let arch = &model.arch;
    let mut out = Vec::with_capacity(16 + 8 * arch.param_count());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.push(CHECKPOINT_VERSION);
    out.push(arch.sizes.len() as u8);
    for s in &arch.sizes {
        out.extend_from_slice(&(*s as u32).to_le_bytes());
    }
    out.extend(arch.activations.iter().map(|a| a.code()));
    out.extend_from_slice(&(arch.param_count() as u64).to_le_bytes());
    for v in model.layers.iter().flatten() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<ModelParameters, DflError> {
    let bad = |m: &str| DflError::Checkpoint(m.to_string());
    let mut pos = 0usize;
    let mut take = |n: usize| -> Result<&[u8], DflError> {
        let s = bytes.get(pos..pos + n).ok_or_else(|| bad("truncated"))?;
        pos += n;
        Ok(s)
    };
    if take(4)? != CHECKPOINT_MAGIC {
        return Err(bad("bad magic"));
    }
    if take(1)?[0] != CHECKPOINT_VERSION {
        return Err(bad("unsupported version"));
    }
    let n_sizes = take(1)?[0] as usize;
    let mut sizes = Vec::with_capacity(n_sizes);
    for _ in 0..n_sizes {
        sizes.push(u32::from_le_bytes(take(4)?.try_into().expect("4 bytes")) as usize);
    }
    let mut activations = Vec::new();
    for _ in 1..n_sizes {
        activations.push(Activation::from_code(take(1)?[0]).ok_or_else(|| bad("unknown activation"))?);
    }
    let arch = Architecture::new(sizes, activations)?;
    let params = u64::from_le_bytes(take(8)?.try_into().expect("8 bytes")) as usize;
    if params != arch.param_count() {
        return Err(bad("parameter count does not match architecture"));
    }
    let mut layers = Vec::new();
    for len in arch.layer_lens() {
        let mut layer = Vec::with_capacity(len);
        for _ in 0..len {
            layer.push(f64::from_le_bytes(take(8)?.try_into().expect("8 bytes")));
        }
        layers.push(layer);
    }
    if pos != bytes.len() {
        return Err(bad("trailing bytes"));
    }
    ModelParameters::from_layers(&arch, layers)
}
