use super::model::ModelParameters;
use super::DflError;

pub fn weight_adjustment_factor(f1: f64, kl: f64, lambda1: f64, lambda2: f64) -> f64 {
    lambda1 * f1 + lambda2 * kl
}

/// Softmax with max subtraction.
pub fn normalize_weights(wafs: &[f64]) -> Vec<f64> {
    super::model::softmax(wafs)
}

pub fn uniform_weights(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

/// Elementwise weighted sum of identically shaped models.
pub fn aggregate(updates: &[(f64, &ModelParameters)]) -> Result<ModelParameters, DflError> {
    let (_, first) = updates.first().ok_or(DflError::EmptyInput)?;
    let total: f64 = updates.iter().map(|(w, _)| w).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(DflError::NotNormalized(total));
    }
    let mut out = ModelParameters::zeros(&first.arch);
    for (w, m) in updates {
        if !m.same_shape(first) {
            return Err(DflError::ShapeMismatch);
        }
        out.axpy(*w, m);
    }
    Ok(out)
}

/// Rate adjustment for one neighbour: `alpha * (waf - mean_waf)`.
pub fn eta_adjustment(waf: f64, alpha: f64, mean_waf: f64) -> f64 {
    alpha * (waf - mean_waf)
}

/// Mean of `eta0 + delta` over neighbours, clamped to `[eta0/10, 10*eta0]`.
/// Returns `eta0` when there are no neighbours.
pub fn learning_rate_from_adjustments(eta0: f64, deltas: &[f64]) -> f64 {
    if deltas.is_empty() {
        return eta0;
    }
    let mean = deltas.iter().map(|d| eta0 + d).sum::<f64>() / deltas.len() as f64;
    mean.clamp(eta0 / 10.0, eta0 * 10.0)
}

/// Per-neighbour `(waf, alpha)` pairs to the round's learning rate.
pub fn learning_rate_round(eta0: f64, neighbors: &[(f64, f64)]) -> f64 {
    if neighbors.is_empty() {
        return eta0;
    }
    let mean_waf = neighbors.iter().map(|(w, _)| w).sum::<f64>() / neighbors.len() as f64;
    let deltas: Vec<f64> = neighbors.iter().map(|&(w, a)| eta_adjustment(w, a, mean_waf)).collect();
    learning_rate_from_adjustments(eta0, &deltas)
}

/// `alpha + beta * waf * (gamma - gamma_bar)`, clamped to `[0, alpha_max]`.
pub fn update_alpha(alpha: f64, waf: f64, gamma: f64, gamma_bar: f64, beta: f64, alpha_max: f64) -> f64 {
    (alpha + beta * waf * (gamma - gamma_bar)).clamp(0.0, alpha_max)
}
