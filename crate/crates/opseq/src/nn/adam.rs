//! Adam optimizer with bias correction, one moment pair per parameter
//! tensor.

use super::tensor::{Scalar, Tensor};
use super::NnError;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

/// First/second moment estimates for one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments<S: Scalar> {
    pub m: Tensor<S>,
    pub v: Tensor<S>,
}

impl<S: Scalar> Moments<S> {
    pub fn zeros_like(param: &Tensor<S>) -> Self {
        Self {
            m: param.zeros_like(),
            v: param.zeros_like(),
        }
    }
}

/// One Adam update of a single tensor. `step` is the 1-based step counter
/// shared by all tensors of the model (incremented once per batch).
pub fn adam_update_tensor<S: Scalar>(
    param: &mut Tensor<S>,
    moments: &mut Moments<S>,
    grad: &Tensor<S>,
    lr: f64,
    step: u64,
) -> Result<(), NnError> {
    if grad.shape() != param.shape() {
        return Err(NnError::ShapeMismatch(format!(
            "adam gradient shape {:?} does not match parameter {:?}",
            grad.shape(),
            param.shape()
        )));
    }
    if !grad.all_finite() {
        return Err(NnError::NonFiniteGradient);
    }
    let b1 = S::from_f64(ADAM_BETA1);
    let b2 = S::from_f64(ADAM_BETA2);
    let eps = S::from_f64(ADAM_EPSILON);
    let one = S::one();
    let correction1 = S::from_f64(1.0 - ADAM_BETA1.powi(step as i32));
    let correction2 = S::from_f64(1.0 - ADAM_BETA2.powi(step as i32));
    let lr = S::from_f64(lr);

    let m = moments.m.data_mut();
    let v = moments.v.data_mut();
    let p = param.data_mut();
    for i in 0..p.len() {
        let g = grad.data()[i];
        m[i] = b1 * m[i] + (one - b1) * g;
        v[i] = b2 * v[i] + (one - b2) * g * g;
        let m_hat = m[i] / correction1;
        let v_hat = v[i] / correction2;
        p[i] = p[i] - lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}
