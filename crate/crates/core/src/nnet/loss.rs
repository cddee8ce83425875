use super::Tensor3;
use crate::error::{Error, Result};

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Cross-entropy of `softmax(logits)` against `label`, with its gradient
/// `softmax(logits) - one_hot(label)`.
pub fn softmax_cross_entropy(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
    if label >= logits.len() {
        return Err(Error::InvalidArgument(format!(
            "label {label} out of range for {} logits",
            logits.len()
        )));
    }
    if let Some(bad) = logits.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("logit {bad}")));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum_exp: f64 = logits.iter().map(|&z| (z - max).exp()).sum();
    let log_sum_exp = max + sum_exp.ln();
    let loss = log_sum_exp - logits[label];
    let mut grad = softmax(logits);
    grad[label] -= 1.0;
    Ok((loss, grad))
}

/// Mean squared error and its gradient `2 (pred - target) / N`.
pub fn mse_loss(prediction: &Tensor3, target: &Tensor3) -> Result<(f64, Tensor3)> {
    if prediction.shape() != target.shape() {
        return Err(Error::DimensionMismatch(format!(
            "prediction {:?} vs target {:?}",
            prediction.shape(),
            target.shape()
        )));
    }
    let n = prediction.values().len() as f64;
    let mut loss = 0.0;
    let grad: Vec<f64> = prediction
        .values()
        .iter()
        .zip(target.values())
        .map(|(p, t)| {
            let d = p - t;
            loss += d * d;
            2.0 * d / n
        })
        .collect();
    let (c, h, w) = prediction.shape();
    Ok((loss / n, Tensor3::from_parts(c, h, w, grad)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits() {
        let (loss, grad) = softmax_cross_entropy(&[0.4, 0.4, 0.4], 1).unwrap();
        assert!((loss - 3f64.ln()).abs() < 1e-15);
        let third = 1.0 / 3.0;
        for (i, g) in grad.iter().enumerate() {
            let want = if i == 1 { third - 1.0 } else { third };
            assert!((g - want).abs() < 1e-15);
        }
    }

    #[test]
    fn large_logits_do_not_overflow() {
        let (loss, grad) = softmax_cross_entropy(&[1000.0, 0.0, 0.0], 0).unwrap();
        assert!(loss.is_finite() && loss.abs() < 1e-300);
        assert!(grad.iter().all(|g| g.is_finite()));
        let (loss, _) = softmax_cross_entropy(&[1000.0, 0.0, 0.0], 2).unwrap();
        assert!((loss - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn errors() {
        assert!(softmax_cross_entropy(&[0.0, 1.0], 2).is_err());
        assert!(softmax_cross_entropy(&[f64::NAN, 1.0], 0).is_err());
        let a = Tensor3::zeros(1, 2, 2);
        let b = Tensor3::zeros(1, 2, 3);
        assert!(mse_loss(&a, &b).is_err());
    }

    #[test]
    fn mse_basics() {
        let a = Tensor3::new(1, 2, 2, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let (l, g) = mse_loss(&a, &a).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.values().iter().all(|&v| v == 0.0));
        let b = Tensor3::new(1, 2, 2, vec![1.1, 1.2, 1.3, 1.4]).unwrap();
        let (l, _) = mse_loss(&b, &a).unwrap();
        assert!((l - 1.0).abs() < 1e-12);
    }

    #[test]
    fn softmax_is_a_distribution() {
        let p = softmax(&[3.0, -1.0, 0.5, 12.0]);
        assert!(p.iter().all(|&v| v > 0.0));
        assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }
}
