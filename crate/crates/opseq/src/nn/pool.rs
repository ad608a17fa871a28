//! 3x3 max pooling with stride 3. Rows and columns past the last full
//! window are dropped; backward routes each gradient to its argmax position
//! (first occurrence, row-major, on ties).

use super::tensor::{Scalar, Tensor};
use super::NnError;

pub const POOL_KERNEL: usize = 3;
pub const POOL_STRIDE: usize = 3;

/// Argmax bookkeeping for the backward pass: flat input index per output.
#[derive(Debug, Clone)]
pub struct PoolTrace {
    pub input_shape: [usize; 3],
    pub argmax: Vec<usize>,
}

pub fn maxpool_forward<S: Scalar>(input: &Tensor<S>) -> Result<(Tensor<S>, PoolTrace), NnError> {
    let (c, h, w) = match input.shape() {
        [c, h, w] => (*c, *h, *w),
        other => {
            return Err(NnError::ShapeMismatch(format!(
                "pool input must be [C,H,W], found {other:?}"
            )))
        }
    };
    if h < POOL_KERNEL || w < POOL_KERNEL {
        return Err(NnError::InputTooSmall {
            height: h,
            width: w,
        });
    }
    let oh = h / POOL_STRIDE;
    let ow = w / POOL_STRIDE;
    let mut out = Tensor::zeros(&[c, oh, ow]);
    let mut argmax = vec![0usize; c * oh * ow];
    let x = input.data();
    let o = out.data_mut();
    for ci in 0..c {
        for oi in 0..oh {
            for oj in 0..ow {
                let mut best_idx = (ci * h + oi * POOL_STRIDE) * w + oj * POOL_STRIDE;
                let mut best = x[best_idx];
                for u in 0..POOL_KERNEL {
                    let row = (ci * h + oi * POOL_STRIDE + u) * w + oj * POOL_STRIDE;
                    for v in 0..POOL_KERNEL {
                        if x[row + v] > best {
                            best = x[row + v];
                            best_idx = row + v;
                        }
                    }
                }
                let oidx = (ci * oh + oi) * ow + oj;
                o[oidx] = best;
                argmax[oidx] = best_idx;
            }
        }
    }
    Ok((
        out,
        PoolTrace {
            input_shape: [c, h, w],
            argmax,
        },
    ))
}

pub fn maxpool_backward<S: Scalar>(
    trace: &PoolTrace,
    grad_out: &Tensor<S>,
) -> Result<Tensor<S>, NnError> {
    let [c, h, w] = trace.input_shape;
    let expected = [c, h / POOL_STRIDE, w / POOL_STRIDE];
    if grad_out.shape() != expected {
        return Err(NnError::ShapeMismatch(format!(
            "pool grad_out must be {expected:?}, found {:?}",
            grad_out.shape()
        )));
    }
    let mut grad_input = Tensor::zeros(&[c, h, w]);
    let gi = grad_input.data_mut();
    for (out_idx, &in_idx) in trace.argmax.iter().enumerate() {
        gi[in_idx] = gi[in_idx] + grad_out.data()[out_idx];
    }
    Ok(grad_input)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;

    #[test]
    fn constant_input_constant_output() {
        let input = Tensor::<f64>::from_vec(&[1, 6, 6], vec![2.5; 36]);
        let (out, _) = maxpool_forward(&input).unwrap();
        assert_eq!(out.shape(), &[1, 2, 2]);
        assert!(out.data().iter().all(|&v| v == 2.5));
    }

    #[test]
    fn single_maximum_routes_all_gradient() {
        let mut values = vec![0.0f64; 9];
        values[1 * 3 + 2] = 7.0;
        let input = Tensor::from_vec(&[1, 3, 3], values);
        let (out, trace) = maxpool_forward(&input).unwrap();
        assert_eq!(out.data(), &[7.0]);
        let grad = maxpool_backward(&trace, &Tensor::from_vec(&[1, 1, 1], vec![4.0])).unwrap();
        for (i, &g) in grad.data().iter().enumerate() {
            assert_eq!(g, if i == 5 { 4.0 } else { 0.0 });
        }
    }

    #[test]
    fn ties_take_first_row_major() {
        let input = Tensor::<f64>::from_vec(&[1, 3, 3], vec![1.0; 9]);
        let (_, trace) = maxpool_forward(&input).unwrap();
        assert_eq!(trace.argmax, vec![0]);
    }

    #[test]
    fn too_small_rejected() {
        let input = Tensor::<f64>::zeros(&[1, 2, 5]);
        assert!(matches!(
            maxpool_forward(&input),
            Err(NnError::InputTooSmall { height: 2, width: 5 })
        ));
    }

    // Oracle: direct window scan for outputs and gradient routing,
    // including trailing rows/cols that must be dropped (7 = 2*3 + 1).
    #[test]
    fn matches_window_scan_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let input = Tensor::<f64>::from_vec(
            &[1, 7, 7],
            (0..49).map(|_| rng.gen_range(-10.0..10.0)).collect(),
        );
        let (out, trace) = maxpool_forward(&input).unwrap();
        assert_eq!(out.shape(), &[1, 2, 2]);

        let grad_out = Tensor::<f64>::from_vec(&[1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]);
        let grad_in = maxpool_backward(&trace, &grad_out).unwrap();

        let mut expected_grad = vec![0.0f64; 49];
        for oi in 0..2 {
            for oj in 0..2 {
                let mut best = f64::NEG_INFINITY;
                let mut best_idx = 0;
                for u in 0..3 {
                    for v in 0..3 {
                        let idx = (oi * 3 + u) * 7 + oj * 3 + v;
                        if input.data()[idx] > best {
                            best = input.data()[idx];
                            best_idx = idx;
                        }
                    }
                }
                assert_eq!(out.data()[oi * 2 + oj], best);
                expected_grad[best_idx] += grad_out.data()[oi * 2 + oj];
            }
        }
        assert_eq!(grad_in.data(), expected_grad.as_slice());
        // Dropped trailing row/column carries no gradient.
        for j in 0..7 {
            assert_eq!(grad_in.data()[6 * 7 + j], 0.0);
        }
    }
}
