//! Fully connected network trained with softmax cross-entropy.
//!
//! Each layer's parameters are one flat vector: the `out x in` weight matrix
//! in row-major order followed by the `out` biases.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::DflError;
use crate::metrics::{charge, Op};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    /// Output layer only.
    Softmax,
}

impl Activation {
    pub fn code(self) -> u8 {
        match self {
            Activation::Relu => 1,
            Activation::Tanh => 2,
            Activation::Softmax => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(Activation::Relu),
            2 => Some(Activation::Tanh),
            3 => Some(Activation::Softmax),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Softmax => "softmax",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Architecture {
    /// Input width followed by each layer's output width.
    pub sizes: Vec<usize>,
    /// One per layer; the last must be `Softmax`.
    pub activations: Vec<Activation>,
}

impl Architecture {
    pub fn new(sizes: Vec<usize>, activations: Vec<Activation>) -> Result<Self, DflError> {
        let ok = sizes.len() >= 2
            && activations.len() == sizes.len() - 1
            && sizes.iter().all(|&s| s > 0)
            && activations.last() == Some(&Activation::Softmax)
            && activations[..activations.len() - 1].iter().all(|a| *a != Activation::Softmax);
        if !ok {
            return Err(DflError::BadArchitecture(format!("{sizes:?} / {activations:?}")));
        }
        Ok(Architecture { sizes, activations })
    }

    /// 16 inputs, 32 ReLU hidden units, softmax over `classes`.
    pub fn default_mlp(classes: usize) -> Self {
        Self::new(vec![16, 32, classes], vec![Activation::Relu, Activation::Softmax]).expect("valid")
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn classes(&self) -> usize {
        *self.sizes.last().expect("non-empty")
    }

    pub fn layer_count(&self) -> usize {
        self.activations.len()
    }

    pub fn layer_len(&self, layer: usize) -> usize {
        self.sizes[layer + 1] * self.sizes[layer] + self.sizes[layer + 1]
    }

    pub fn layer_lens(&self) -> Vec<usize> {
        (0..self.layer_count()).map(|l| self.layer_len(l)).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layer_lens().iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParameters {
    pub arch: Architecture,
    pub layers: Vec<Vec<f64>>,
}

/// Labelled feature vectors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub xs: Vec<Vec<f64>>,
    pub ys: Vec<usize>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    pub fn push(&mut self, x: Vec<f64>, y: usize) {
        self.xs.push(x);
        self.ys.push(y);
    }

    pub fn extend(&mut self, other: Dataset) {
        self.xs.extend(other.xs);
        self.ys.extend(other.ys);
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset { xs: idx.iter().map(|&i| self.xs[i].clone()).collect(), ys: idx.iter().map(|&i| self.ys[i]).collect() }
    }
}

impl ModelParameters {
    pub fn zeros(arch: &Architecture) -> Self {
        ModelParameters { layers: arch.layer_lens().into_iter().map(|n| vec![0.0; n]).collect(), arch: arch.clone() }
    }

    /// He-normal weights for hidden layers, `1/fan_in` variance for the output
    /// layer, zero biases.
    pub fn init<R: Rng + ?Sized>(arch: &Architecture, rng: &mut R) -> Self {
        let mut m = Self::zeros(arch);
        for (l, layer) in m.layers.iter_mut().enumerate() {
            let fan_in = arch.sizes[l] as f64;
            let var = if arch.activations[l] == Activation::Relu { 2.0 / fan_in } else { 1.0 / fan_in };
            let normal = Normal::new(0.0, var.sqrt()).expect("positive sd");
            let weights = arch.sizes[l] * arch.sizes[l + 1];
            for w in &mut layer[..weights] {
                *w = normal.sample(rng);
            }
        }
        m
    }

    pub fn from_layers(arch: &Architecture, layers: Vec<Vec<f64>>) -> Result<Self, DflError> {
        let lens = arch.layer_lens();
        if layers.len() != lens.len() || layers.iter().zip(&lens).any(|(l, n)| l.len() != *n) {
            return Err(DflError::ShapeMismatch);
        }
        Ok(ModelParameters { arch: arch.clone(), layers })
    }

    pub fn same_shape(&self, other: &ModelParameters) -> bool {
        self.arch == other.arch && self.layers.iter().zip(&other.layers).all(|(a, b)| a.len() == b.len())
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().flatten().all(|v| v.is_finite())
    }

    pub fn flat(&self) -> Vec<f64> {
        self.layers.iter().flatten().copied().collect()
    }

    /// `self + scale * other`, elementwise.
    pub fn axpy(&mut self, scale: f64, other: &ModelParameters) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        }
    }

    fn forward_trace(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = vec![x.to_vec()];
        for l in 0..self.arch.layer_count() {
            let (n_in, n_out) = (self.arch.sizes[l], self.arch.sizes[l + 1]);
            let p = &self.layers[l];
            let input = acts.last().expect("non-empty");
            let mut z: Vec<f64> = (0..n_out)
                .map(|o| {
                    let row = &p[o * n_in..(o + 1) * n_in];
                    p[n_in * n_out + o] + row.iter().zip(input).map(|(w, v)| w * v).sum::<f64>()
                })
                .collect();
            match self.arch.activations[l] {
                Activation::Relu => z.iter_mut().for_each(|v| *v = v.max(0.0)),
                Activation::Tanh => z.iter_mut().for_each(|v| *v = v.tanh()),
                Activation::Softmax => z = softmax(&z),
            }
            acts.push(z);
        }
        acts
    }

    /// Class probabilities. Free of counter charges; see [`ModelParameters::infer`].
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.forward_trace(x).pop().expect("output layer")
    }

    /// One model inference. Charges `I`.
    pub fn infer(&self, x: &[f64]) -> Vec<f64> {
        charge(Op::Inference);
        self.forward(x)
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        argmax(&self.forward(x))
    }

    /// Mean cross-entropy over a batch.
    pub fn loss(&self, batch: &Dataset) -> f64 {
        let n = batch.len().max(1) as f64;
        batch.xs.iter().zip(&batch.ys).map(|(x, &y)| -self.forward(x)[y].max(1e-300).ln()).sum::<f64>() / n
    }

    /// Gradient of [`ModelParameters::loss`], laid out like the parameters.
    pub fn gradient(&self, batch: &Dataset) -> Result<ModelParameters, DflError> {
        let mut grad = Self::zeros(&self.arch);
        if batch.is_empty() {
            return Ok(grad);
        }
        let inv_n = 1.0 / batch.len() as f64;
        let last = self.arch.layer_count() - 1;
        for (x, &y) in batch.xs.iter().zip(&batch.ys) {
            let acts = self.forward_trace(x);
            // Softmax + cross-entropy: dL/dz = p - onehot(y).
            let mut delta = acts[last + 1].clone();
            delta[y] -= 1.0;
            for l in (0..=last).rev() {
                let (n_in, n_out) = (self.arch.sizes[l], self.arch.sizes[l + 1]);
                let input = &acts[l];
                let g = &mut grad.layers[l];
                for o in 0..n_out {
                    let d = delta[o] * inv_n;
                    for (gw, v) in g[o * n_in..(o + 1) * n_in].iter_mut().zip(input) {
                        *gw += d * v;
                    }
                    g[n_in * n_out + o] += d;
                }
                if l == 0 {
                    break;
                }
                let p = &self.layers[l];
                let mut back = vec![0.0; n_in];
                for (o, d) in delta.iter().enumerate() {
                    for (b, w) in back.iter_mut().zip(&p[o * n_in..(o + 1) * n_in]) {
                        *b += d * w;
                    }
                }
                match self.arch.activations[l - 1] {
                    Activation::Relu => back.iter_mut().zip(input).for_each(|(b, a)| {
                        if *a <= 0.0 {
                            *b = 0.0
                        }
                    }),
                    Activation::Tanh => back.iter_mut().zip(input).for_each(|(b, a)| *b *= 1.0 - a * a),
                    Activation::Softmax => unreachable!("softmax is output-only"),
                }
                delta = back;
            }
        }
        if !grad.is_finite() {
            return Err(DflError::NonFiniteGradient);
        }
        Ok(grad)
    }
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// `m - eta * grad J(at)` on one batch: the gradient is taken at `at` and the
/// step is applied to `m`.
pub fn local_update(
    model: &ModelParameters,
    aggregated: &ModelParameters,
    eta: f64,
    batch: &Dataset,
) -> Result<ModelParameters, DflError> {
    if !model.same_shape(aggregated) {
        return Err(DflError::ShapeMismatch);
    }
    let g = aggregated.gradient(batch)?;
    let mut next = model.clone();
    next.axpy(-eta, &g);
    Ok(next)
}
