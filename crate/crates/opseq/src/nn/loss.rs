//! Softmax cross-entropy with max-subtracted, overflow-safe softmax.

use super::tensor::{Scalar, Tensor};
use super::NnError;

/// Returns (loss, gradient wrt logits) for a single sample.
/// loss = -log softmax(logits)[label]; grad = softmax(logits) - onehot.
pub fn softmax_cross_entropy<S: Scalar>(
    logits: &Tensor<S>,
    label: usize,
) -> Result<(S, Tensor<S>), NnError> {
    let k = logits.len();
    if label >= k {
        return Err(NnError::LabelOutOfRange { label, classes: k });
    }
    let max = logits
        .data()
        .iter()
        .fold(S::neg_infinity(), |a, &b| if b > a { b } else { a });
    let mut probs = logits.clone();
    let mut sum = S::zero();
    for v in probs.data_mut() {
        *v = (*v - max).exp();
        sum = sum + *v;
    }
    for v in probs.data_mut() {
        *v = *v / sum;
    }
    // -log p = -(z_label - max - log sum), computed from the shifted logits
    // to avoid log of a denormal probability.
    let shifted = logits.data()[label] - max;
    let loss = sum.ln() - shifted;
    let mut grad = probs;
    grad.data_mut()[label] = grad.data_mut()[label] - S::one();
    Ok((loss, grad))
}

/// Softmax probabilities alone (used for reporting).
pub fn softmax<S: Scalar>(logits: &Tensor<S>) -> Tensor<S> {
    let max = logits
        .data()
        .iter()
        .fold(S::neg_infinity(), |a, &b| if b > a { b } else { a });
    let mut out = logits.clone();
    let mut sum = S::zero();
    for v in out.data_mut() {
        *v = (*v - max).exp();
        sum = sum + *v;
    }
    for v in out.data_mut() {
        *v = *v / sum;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_ln_k() {
        let logits = Tensor::<f64>::from_vec(&[4], vec![0.7; 4]);
        let (loss, _) = softmax_cross_entropy(&logits, 2).unwrap();
        assert!((loss - 4.0f64.ln()).abs() < 1e-12);
        assert!((4.0f64.ln() - 1.386294).abs() < 1e-6);
    }

    #[test]
    fn extreme_logits_stay_finite() {
        let logits = Tensor::<f64>::from_vec(&[2], vec![1000.0, 0.0]);
        let (loss, grad) = softmax_cross_entropy(&logits, 0).unwrap();
        assert!(loss.is_finite());
        assert!(loss.abs() < 1e-12);
        assert!(grad.all_finite());

        let (loss_bad, _) = softmax_cross_entropy(&logits, 1).unwrap();
        assert!(loss_bad.is_finite());
        assert!((loss_bad - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn gradient_sums_to_zero() {
        let logits = Tensor::<f64>::from_vec(&[5], vec![0.3, -2.0, 1.7, 0.0, 4.1]);
        let (_, grad) = softmax_cross_entropy(&logits, 3).unwrap();
        let total: f64 = grad.data().iter().sum();
        assert!(total.abs() < 1e-12, "{total}");
    }

    #[test]
    fn label_out_of_range() {
        let logits = Tensor::<f64>::zeros(&[3]);
        assert!(matches!(
            softmax_cross_entropy(&logits, 3),
            Err(NnError::LabelOutOfRange { label: 3, classes: 3 })
        ));
    }

    #[test]
    fn softmax_sums_to_one() {
        let logits = Tensor::<f64>::from_vec(&[4], vec![-3.0, 0.0, 2.0, 100.0]);
        let p = softmax(&logits);
        let total: f64 = p.data().iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert!(p.data().iter().all(|&v| v >= 0.0));
    }
}
