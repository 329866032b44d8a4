use serde::{Deserialize, Serialize};

use super::model::{Architecture, ModelParameters};
use super::DflError;

/// The retained entries of one layer, indices strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseLayer {
    pub len: usize,
    pub entries: Vec<(u32, f64)>,
}

impl SparseLayer {
    pub fn densify(&self) -> Result<Vec<f64>, DflError> {
        let mut out = vec![0.0; self.len];
        for &(i, v) in &self.entries {
            let slot = out.get_mut(i as usize).ok_or(DflError::IndexOutOfRange { index: i as usize, len: self.len })?;
            *slot = v;
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseUpdate {
    pub k_top: usize,
    pub layers: Vec<SparseLayer>,
}

/// Keep the `min(k_top, len)` largest-magnitude entries of each layer.
/// Equal magnitudes go to the lower index.
pub fn compress_topk(model: &ModelParameters, k_top: usize) -> SparseUpdate {
    let layers = model.layers.iter().map(|layer| topk_layer(layer, k_top)).collect();
    SparseUpdate { k_top, layers }
}

pub fn topk_layer(values: &[f64], k_top: usize) -> SparseLayer {
    let k = k_top.min(values.len());
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()).then(a.cmp(&b)));
    let mut keep = order[..k].to_vec();
    keep.sort_unstable();
    SparseLayer { len: values.len(), entries: keep.into_iter().map(|i| (i as u32, values[i])).collect() }
}

pub fn decompress(update: &SparseUpdate, arch: &Architecture) -> Result<ModelParameters, DflError> {
    let layers = update.layers.iter().map(SparseLayer::densify).collect::<Result<Vec<_>, _>>()?;
    ModelParameters::from_layers(arch, layers)
}
