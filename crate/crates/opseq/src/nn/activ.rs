//! Exponential linear unit with alpha = 1: x for x > 0, e^x - 1 otherwise.

use super::tensor::{Scalar, Tensor};

pub fn elu<S: Scalar>(x: &Tensor<S>) -> Tensor<S> {
    let mut out = x.clone();
    for v in out.data_mut() {
        if *v <= S::zero() {
            *v = v.exp() - S::one();
        }
    }
    out
}

/// Derivative expressed through the forward output: 1 where the output is
/// positive, output + 1 elsewhere (elu is monotone so the sign of the
/// output matches the sign of the input).
pub fn elu_backward<S: Scalar>(output: &Tensor<S>, grad_out: &Tensor<S>) -> Tensor<S> {
    debug_assert_eq!(output.shape(), grad_out.shape());
    let mut grad = grad_out.clone();
    for (g, &y) in grad.data_mut().iter_mut().zip(output.data()) {
        if y <= S::zero() {
            *g = *g * (y + S::one());
        }
    }
    grad
}
