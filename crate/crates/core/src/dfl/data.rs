//! Seeded synthetic non-IID data.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand_distr::{Dirichlet, Normal};

use super::model::{Dataset, ModelParameters};

/// Class-conditional Gaussians clipped to the unit cube.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTask {
    pub dim: usize,
    pub classes: usize,
    pub means: Vec<Vec<f64>>,
    pub sd: f64,
}

impl SyntheticTask {
    /// Means drawn uniformly from `[0.2, 0.8]^dim`.
    pub fn new<R: Rng + ?Sized>(rng: &mut R, dim: usize, classes: usize, sd: f64) -> Self {
        let means = (0..classes).map(|_| (0..dim).map(|_| rng.gen_range(0.2..0.8)).collect()).collect();
        SyntheticTask { dim, classes, means, sd }
    }

    pub fn sample_class<R: Rng + ?Sized>(&self, rng: &mut R, class: usize) -> Vec<f64> {
        let noise = Normal::new(0.0, self.sd).expect("sd is finite and non-negative");
        self.means[class].iter().map(|m| (m + noise.sample(rng)).clamp(0.0, 1.0)).collect()
    }

    /// `n` samples with labels drawn from `proportions`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize, proportions: &[f64]) -> Dataset {
        let pick = WeightedIndex::new(proportions).unwrap_or_else(|_| WeightedIndex::new(vec![1.0; self.classes]).expect("uniform"));
        let mut d = Dataset::default();
        for _ in 0..n {
            let y = pick.sample(rng);
            d.push(self.sample_class(rng, y), y);
        }
        d
    }
}

/// Per-domain class proportions from a symmetric Dirichlet.
pub fn dirichlet_partition<R: Rng + ?Sized>(rng: &mut R, alpha: f64, classes: usize, domains: usize) -> Vec<Vec<f64>> {
    let dir = Dirichlet::new_with_size(alpha, classes).expect("alpha > 0 and at least two classes");
    (0..domains).map(|_| dir.sample(rng)).collect()
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, b| (h ^ u64::from(*b)).wrapping_mul(FNV_PRIME))
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable fingerprint of a device id in `[0, 1)^dim`.
pub fn featurize_device(device_id: &str, dim: usize) -> Vec<f64> {
    let mut state = fnv1a(device_id.as_bytes());
    (0..dim).map(|_| (splitmix64(&mut state) >> 11) as f64 / (1u64 << 53) as f64).collect()
}

/// One observation of a device: its fingerprint plus Gaussian noise, clipped.
pub fn device_observation<R: Rng + ?Sized>(rng: &mut R, device_id: &str, dim: usize, noise_sd: f64) -> Vec<f64> {
    let noise = Normal::new(0.0, noise_sd).expect("sd is finite and non-negative");
    featurize_device(device_id, dim).into_iter().map(|v| (v + noise.sample(rng)).clamp(0.0, 1.0)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContextPrediction {
    pub class: usize,
    /// Softmax output, one entry per class.
    pub confidence: Vec<f64>,
    /// The featurized id that was fed to the model.
    pub features: Vec<f64>,
}

/// Query the domain model with a device's fingerprint. Charges `I`.
pub fn predict_context(model: &ModelParameters, device_id: &str) -> ContextPrediction {
    let features = featurize_device(device_id, model.arch.input_dim());
    let confidence = model.infer(&features);
    let class = super::model::argmax(&confidence);
    ContextPrediction { class, confidence, features }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fingerprint_is_stable_and_in_range() {
        let a = featurize_device("dev-a", 16);
        assert_eq!(a, featurize_device("dev-a", 16));
        assert_ne!(a, featurize_device("dev-b", 16));
        assert!(a.iter().all(|v| (0.0..1.0).contains(v)));
    }

    #[test]
    fn samples_follow_proportions() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let task = SyntheticTask::new(&mut rng, 16, 4, 0.15);
        let d = task.sample(&mut rng, 200, &[0.0, 1.0, 0.0, 0.0]);
        assert!(d.ys.iter().all(|&y| y == 1));
        assert!(d.xs.iter().flatten().all(|v| (0.0..=1.0).contains(v)));
        for p in dirichlet_partition(&mut rng, 0.3, 4, 5) {
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}
