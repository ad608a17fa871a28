//! Feature-map-to-sequence bridge between the convolutional stack and the
//! LSTM: spatial positions become timesteps (row-major), channels become
//! per-step features. Sequences longer than the configured window keep the
//! earliest timesteps.

use super::tensor::{Scalar, Tensor};
use super::NnError;

/// [C, H, W] -> [T, C] with T = min(H*W, window).
pub fn flatten_to_sequence<S: Scalar>(
    fmap: &Tensor<S>,
    window: usize,
) -> Result<Tensor<S>, NnError> {
    let (c, h, w) = match fmap.shape() {
        [c, h, w] => (*c, *h, *w),
        other => {
            return Err(NnError::ShapeMismatch(format!(
                "flatten input must be [C,H,W], found {other:?}"
            )))
        }
    };
    if window == 0 {
        return Err(NnError::ShapeMismatch("window must be >= 1".to_string()));
    }
    let t0 = h * w;
    let t = t0.min(window);
    let mut out = Tensor::zeros(&[t, c]);
    let x = fmap.data();
    let o = out.data_mut();
    for ti in 0..t {
        for ci in 0..c {
            o[ti * c + ci] = x[ci * t0 + ti];
        }
    }
    Ok(out)
}

/// Scatter sequence gradients back onto the feature map; truncated
/// positions receive zero.
pub fn flatten_backward<S: Scalar>(
    fmap_shape: &[usize],
    grad_seq: &Tensor<S>,
) -> Result<Tensor<S>, NnError> {
    let (c, h, w) = (fmap_shape[0], fmap_shape[1], fmap_shape[2]);
    let t = grad_seq.shape()[0];
    if grad_seq.shape()[1] != c || t > h * w {
        return Err(NnError::ShapeMismatch(format!(
            "flatten grad_seq {:?} inconsistent with fmap {fmap_shape:?}",
            grad_seq.shape()
        )));
    }
    let mut grad = Tensor::zeros(fmap_shape);
    let g = grad.data_mut();
    let t0 = h * w;
    for ti in 0..t {
        for ci in 0..c {
            g[ci * t0 + ti] = grad_seq.data()[ti * c + ci];
        }
    }
    Ok(grad)
}
