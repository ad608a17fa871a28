//! Fully connected output layer.

use super::tensor::{Scalar, Tensor};
use super::NnError;

/// y = W x + b with W of shape [K, C] and x of shape [C].
pub fn dense_forward<S: Scalar>(
    x: &Tensor<S>,
    weights: &Tensor<S>,
    bias: &Tensor<S>,
) -> Result<Tensor<S>, NnError> {
    let (k, c) = match weights.shape() {
        [k, c] => (*k, *c),
        other => {
            return Err(NnError::ShapeMismatch(format!(
                "dense weights must be [K,C], found {other:?}"
            )))
        }
    };
    if x.shape() != [c] || bias.shape() != [k] {
        return Err(NnError::ShapeMismatch(format!(
            "dense expects x[{c}] and bias[{k}], found x{:?} bias{:?}",
            x.shape(),
            bias.shape()
        )));
    }
    let mut out = Tensor::zeros(&[k]);
    for ki in 0..k {
        let row = &weights.data()[ki * c..(ki + 1) * c];
        let mut acc = bias.data()[ki];
        for (wv, xv) in row.iter().zip(x.data()) {
            acc = acc + *wv * *xv;
        }
        out.data_mut()[ki] = acc;
    }
    Ok(out)
}

pub fn dense_backward<S: Scalar>(
    x: &Tensor<S>,
    weights: &Tensor<S>,
    grad_out: &Tensor<S>,
) -> Result<(Tensor<S>, Tensor<S>, Tensor<S>), NnError> {
    let (k, c) = (weights.shape()[0], weights.shape()[1]);
    if grad_out.shape() != [k] {
        return Err(NnError::ShapeMismatch(format!(
            "dense grad_out must be [{k}], found {:?}",
            grad_out.shape()
        )));
    }
    let mut grad_x = Tensor::zeros(&[c]);
    let mut grad_w = weights.zeros_like();
    let grad_b = grad_out.clone();
    for ki in 0..k {
        let g = grad_out.data()[ki];
        let row = &weights.data()[ki * c..(ki + 1) * c];
        let grow = &mut grad_w.data_mut()[ki * c..(ki + 1) * c];
        for ci in 0..c {
            grow[ci] = g * x.data()[ci];
        }
        for (gx, wv) in grad_x.data_mut().iter_mut().zip(row) {
            *gx = *gx + g * *wv;
        }
    }
    Ok((grad_x, grad_w, grad_b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_and_backward_tiny_case() {
        let x = Tensor::<f64>::from_vec(&[2], vec![1.0, 2.0]);
        let w = Tensor::from_vec(&[2, 2], vec![1.0, 0.0, -1.0, 3.0]);
        let b = Tensor::from_vec(&[2], vec![0.5, -0.5]);
        let y = dense_forward(&x, &w, &b).unwrap();
        assert_eq!(y.data(), &[1.5, 4.5]);

        let g = Tensor::from_vec(&[2], vec![1.0, 1.0]);
        let (gx, gw, gb) = dense_backward(&x, &w, &g).unwrap();
        assert_eq!(gx.data(), &[0.0, 3.0]);
        assert_eq!(gw.data(), &[1.0, 2.0, 1.0, 2.0]);
        assert_eq!(gb.data(), g.data());
    }
}
