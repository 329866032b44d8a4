use serde::{Deserialize, Serialize};

use super::DflError;

/// Which F1 expression to use. `HalfHarmonic` is half the harmonic mean of precision and recall.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum F1Formula {
    #[default]
    Standard,
    HalfHarmonic,
}

pub const KL_EPSILON: f64 = 1e-12;
const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// One-vs-rest F1 for `positive`.
pub fn f1_score(predictions: &[usize], truth: &[usize], positive: usize, formula: F1Formula) -> Result<f64, DflError> {
    if predictions.len() != truth.len() {
        return Err(DflError::LengthMismatch(predictions.len(), truth.len()));
    }
    if truth.is_empty() {
        return Err(DflError::EmptyInput);
    }
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for (&p, &t) in predictions.iter().zip(truth) {
        match (p == positive, t == positive) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            (false, false) => {}
        }
    }
    let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if tp + fneg == 0 { 0.0 } else { tp as f64 / (tp + fneg) as f64 };
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    let factor = match formula {
        F1Formula::Standard => 2.0,
        F1Formula::HalfHarmonic => 1.0,
    };
    Ok(factor * precision * recall / (precision + recall))
}

/// Unweighted mean of per-class F1 over `classes`.
pub fn macro_f1(predictions: &[usize], truth: &[usize], classes: usize, formula: F1Formula) -> Result<f64, DflError> {
    let mut sum = 0.0;
    for c in 0..classes {
        sum += f1_score(predictions, truth, c, formula)?;
    }
    Ok(sum / classes as f64)
}

fn check_distribution(p: &[f64]) -> Result<(), DflError> {
    let sum: f64 = p.iter().sum();
    if p.iter().any(|v| *v < 0.0 || !v.is_finite()) || (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(DflError::NotNormalized(sum));
    }
    Ok(())
}

/// `sum p_i ln(p_i / q_i)`. Zero-mass terms of `p` contribute nothing; `q` is
/// floored at [`KL_EPSILON`].
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64, DflError> {
    if p.len() != q.len() {
        return Err(DflError::LengthMismatch(p.len(), q.len()));
    }
    check_distribution(p)?;
    check_distribution(q)?;
    Ok(p.iter()
        .zip(q)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(pi, qi)| pi * (pi / qi.max(KL_EPSILON)).ln())
        .sum())
}

/// Label frequencies with add-one smoothing, so no class has zero mass.
pub fn class_distribution(labels: &[usize], classes: usize) -> Vec<f64> {
    let mut counts = vec![1.0; classes];
    for &y in labels {
        if y < classes {
            counts[y] += 1.0;
        }
    }
    let total: f64 = counts.iter().sum();
    counts.into_iter().map(|c| c / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f1_by_hand() {
        let t = [1, 0, 1, 0];
        assert_eq!(f1_score(&t, &t, 1, F1Formula::Standard).unwrap(), 1.0);
        assert_eq!(f1_score(&t, &t, 1, F1Formula::HalfHarmonic).unwrap(), 0.5);
        // no true positives
        assert_eq!(f1_score(&[0, 0], &[1, 1], 1, F1Formula::Standard).unwrap(), 0.0);
        // TP=2 FP=1 FN=1
        let f = f1_score(&[1, 1, 1, 0, 0], &[1, 1, 0, 1, 0], 1, F1Formula::Standard).unwrap();
        assert!((f - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(f1_score(&[1], &[1, 0], 1, F1Formula::Standard), Err(DflError::LengthMismatch(1, 2)));
        assert_eq!(f1_score(&[], &[], 1, F1Formula::Standard), Err(DflError::EmptyInput));
    }

    #[test]
    fn kl_by_hand() {
        let p = [0.5, 0.5];
        let q = [0.25, 0.75];
        let expect = 0.5 * 2f64.ln() + 0.5 * (2.0f64 / 3.0).ln();
        assert!((kl_divergence(&p, &q).unwrap() - expect).abs() < 1e-12);
        assert!((expect - 0.14384).abs() < 1e-5);
        assert!((kl_divergence(&p, &q).unwrap() - kl_divergence(&q, &p).unwrap()).abs() > 1e-3);
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        assert!(matches!(kl_divergence(&[0.5, 0.6], &p), Err(DflError::NotNormalized(_))));
        assert!(kl_divergence(&[1.0, 0.0], &[0.0, 1.0]).unwrap().is_finite());
    }

    #[test]
    fn smoothed_distribution() {
        assert_eq!(class_distribution(&[0, 0], 2), vec![0.75, 0.25]);
        assert_eq!(class_distribution(&[], 4), vec![0.25; 4]);
    }
}
