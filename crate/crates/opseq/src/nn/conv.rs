//! 2-D convolution with stride 1 and "same" zero padding.

use super::tensor::{Scalar, Tensor};
use super::NnError;

fn check_conv_shapes<S: Scalar>(
    input: &Tensor<S>,
    weights: &Tensor<S>,
    bias: &Tensor<S>,
) -> Result<(usize, usize, usize, usize, usize), NnError> {
    let (c, h, w) = match input.shape() {
        [c, h, w] => (*c, *h, *w),
        other => {
            return Err(NnError::ShapeMismatch(format!(
                "conv input must be [C,H,W], found {other:?}"
            )))
        }
    };
    let (f, wc, k) = match weights.shape() {
        [f, wc, k1, k2] if k1 == k2 => (*f, *wc, *k1),
        other => {
            return Err(NnError::ShapeMismatch(format!(
                "conv weights must be [F,C,k,k], found {other:?}"
            )))
        }
    };
    if wc != c {
        return Err(NnError::ShapeMismatch(format!(
            "conv weights expect {wc} input channels, input has {c}"
        )));
    }
    if k % 2 == 0 {
        return Err(NnError::ShapeMismatch(format!(
            "conv kernel must be odd for same padding, found {k}"
        )));
    }
    if bias.shape() != [f] {
        return Err(NnError::ShapeMismatch(format!(
            "conv bias must be [F={f}], found {:?}",
            bias.shape()
        )));
    }
    Ok((c, h, w, f, k))
}

/// out[f,i,j] = bias[f] + sum_{c,u,v} input[c, i+u-off, j+v-off] * w[f,c,u,v]
/// with out-of-range input read as zero and off = (k-1)/2.
pub fn conv2d_forward<S: Scalar>(
    input: &Tensor<S>,
    weights: &Tensor<S>,
    bias: &Tensor<S>,
) -> Result<Tensor<S>, NnError> {
    let (c, h, w, f, k) = check_conv_shapes(input, weights, bias)?;
    let off = (k - 1) / 2;
    let mut out = Tensor::zeros(&[f, h, w]);
    let x = input.data();
    let wt = weights.data();
    let b = bias.data();
    let o = out.data_mut();
    for fi in 0..f {
        let plane = &mut o[fi * h * w..(fi + 1) * h * w];
        for v in plane.iter_mut() {
            *v = b[fi];
        }
        for ci in 0..c {
            let xs = &x[ci * h * w..(ci + 1) * h * w];
            for u in 0..k {
                for v in 0..k {
                    let wv = wt[((fi * c + ci) * k + u) * k + v];
                    if wv == S::zero() {
                        continue;
                    }
                    // Valid output rows for this tap: 0 <= i + u - off < h.
                    let i_lo = off.saturating_sub(u);
                    let i_hi = (h + off).saturating_sub(u).min(h);
                    let j_lo = off.saturating_sub(v);
                    let j_hi = (w + off).saturating_sub(v).min(w);
                    for i in i_lo..i_hi {
                        let src_row = (i + u - off) * w;
                        let dst_row = i * w;
                        for j in j_lo..j_hi {
                            plane[dst_row + j] =
                                plane[dst_row + j] + wv * xs[src_row + j + v - off];
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Exact gradients of [`conv2d_forward`] given the forward input and the
/// upstream gradient.
pub fn conv2d_backward<S: Scalar>(
    input: &Tensor<S>,
    weights: &Tensor<S>,
    grad_out: &Tensor<S>,
) -> Result<(Tensor<S>, Tensor<S>, Tensor<S>), NnError> {
    let (c, h, w, f, k) = {
        let bias = Tensor::zeros(&[weights.shape()[0]]);
        check_conv_shapes(input, weights, &bias)?
    };
    if grad_out.shape() != [f, h, w] {
        return Err(NnError::ShapeMismatch(format!(
            "conv grad_out must be [{f},{h},{w}], found {:?}",
            grad_out.shape()
        )));
    }
    let off = (k - 1) / 2;
    let mut grad_input = input.zeros_like();
    let mut grad_weights = weights.zeros_like();
    let mut grad_bias = Tensor::zeros(&[f]);

    let x = input.data();
    let wt = weights.data();
    let go = grad_out.data();
    let gi = grad_input.data_mut();
    let gw = grad_weights.data_mut();
    let gb = grad_bias.data_mut();

    for fi in 0..f {
        let gplane = &go[fi * h * w..(fi + 1) * h * w];
        gb[fi] = gplane.iter().fold(S::zero(), |acc, &g| acc + g);
        for ci in 0..c {
            let xs = &x[ci * h * w..(ci + 1) * h * w];
            let gxs = &mut gi[ci * h * w..(ci + 1) * h * w];
            for u in 0..k {
                for v in 0..k {
                    let widx = ((fi * c + ci) * k + u) * k + v;
                    let wv = wt[widx];
                    let mut acc = S::zero();
                    let i_lo = off.saturating_sub(u);
                    let i_hi = (h + off).saturating_sub(u).min(h);
                    let j_lo = off.saturating_sub(v);
                    let j_hi = (w + off).saturating_sub(v).min(w);
                    for i in i_lo..i_hi {
                        let src_row = (i + u - off) * w;
                        let dst_row = i * w;
                        for j in j_lo..j_hi {
                            let g = gplane[dst_row + j];
                            acc = acc + g * xs[src_row + j + v - off];
                            gxs[src_row + j + v - off] =
                                gxs[src_row + j + v - off] + g * wv;
                        }
                    }
                    gw[widx] = gw[widx] + acc;
                }
            }
        }
    }
    Ok((grad_input, grad_weights, grad_bias))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;

    fn rand_tensor(shape: &[usize], rng: &mut rand_chacha::ChaCha8Rng) -> Tensor<f64> {
        let len = shape.iter().product();
        Tensor::from_vec(shape, (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect())
    }

    #[test]
    fn identity_convolution() {
        let input = Tensor::<f64>::from_vec(&[1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]);
        let weights = Tensor::from_vec(&[1, 1, 1, 1], vec![1.0]);
        let bias = Tensor::zeros(&[1]);
        let out = conv2d_forward(&input, &weights, &bias).unwrap();
        assert_eq!(out.data(), input.data());
    }

    #[test]
    fn zero_weights_yield_constant_bias() {
        let input = Tensor::<f64>::from_vec(&[1, 3, 3], (0..9).map(f64::from).collect());
        let weights = Tensor::zeros(&[2, 1, 3, 3]);
        let bias = Tensor::from_vec(&[2], vec![5.0, -1.0]);
        let out = conv2d_forward(&input, &weights, &bias).unwrap();
        assert!(out.data()[..9].iter().all(|&v| v == 5.0));
        assert!(out.data()[9..].iter().all(|&v| v == -1.0));
    }

    // Oracle: direct six-nested-loop evaluation of the defining sum.
    fn conv_reference(input: &Tensor<f64>, weights: &Tensor<f64>, bias: &Tensor<f64>) -> Tensor<f64> {
        let (c, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
        let (f, k) = (weights.shape()[0], weights.shape()[2]);
        let off = (k - 1) / 2;
        let mut out = Tensor::zeros(&[f, h, w]);
        for fi in 0..f {
            for i in 0..h {
                for j in 0..w {
                    let mut acc = bias.data()[fi];
                    for ci in 0..c {
                        for u in 0..k {
                            for v in 0..k {
                                let ii = i as isize + u as isize - off as isize;
                                let jj = j as isize + v as isize - off as isize;
                                if ii >= 0 && jj >= 0 && (ii as usize) < h && (jj as usize) < w {
                                    acc += input.data()[(ci * h + ii as usize) * w + jj as usize]
                                        * weights.data()[((fi * c + ci) * k + u) * k + v];
                                }
                            }
                        }
                    }
                    out.data_mut()[(fi * h + i) * w + j] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn forward_matches_reference() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for &(c, h, w, f, k) in &[(1, 6, 6, 2, 3), (2, 5, 7, 3, 3), (3, 9, 9, 2, 9)] {
            let input = rand_tensor(&[c, h, w], &mut rng);
            let weights = rand_tensor(&[f, c, k, k], &mut rng);
            let bias = rand_tensor(&[f], &mut rng);
            let fast = conv2d_forward(&input, &weights, &bias).unwrap();
            let slow = conv_reference(&input, &weights, &bias);
            for (a, b) in fast.data().iter().zip(slow.data()) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn backward_zero_grad_and_bias_sum() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let input = rand_tensor(&[2, 5, 5], &mut rng);
        let weights = rand_tensor(&[3, 2, 3, 3], &mut rng);

        let zero = Tensor::zeros(&[3, 5, 5]);
        let (gi, gw, gb) = conv2d_backward(&input, &weights, &zero).unwrap();
        assert!(gi.data().iter().all(|&v| v == 0.0));
        assert!(gw.data().iter().all(|&v| v == 0.0));
        assert!(gb.data().iter().all(|&v| v == 0.0));

        let grad_out = rand_tensor(&[3, 5, 5], &mut rng);
        let (_, _, gb) = conv2d_backward(&input, &weights, &grad_out).unwrap();
        for f in 0..3 {
            let expected: f64 = grad_out.data()[f * 25..(f + 1) * 25].iter().sum();
            assert!((gb.data()[f] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_errors() {
        let input = Tensor::<f64>::zeros(&[2, 4, 4]);
        let weights = Tensor::zeros(&[3, 1, 3, 3]); // wrong channel count
        let bias = Tensor::zeros(&[3]);
        assert!(matches!(
            conv2d_forward(&input, &weights, &bias),
            Err(NnError::ShapeMismatch(_))
        ));
    }
}
