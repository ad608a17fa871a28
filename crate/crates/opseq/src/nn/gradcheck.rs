//! Finite-difference verification of every layer's analytic gradients and
//! of the composed network, at f64 with central differences (h = 1e-5).
//!
//! Relative error uses |a - fd| / max(|a|, |fd|, 1e-4). The scale floor
//! keeps finite-difference cancellation noise (the difference of two O(1)
//! losses carries ~5e-12 through the 2h divisor) from registering as
//! relative error on near-zero gradients; any systematic defect larger
//! than ~1e-9 absolute still trips the 1e-5 tolerance.

use crate::rng::{substream, CounterRng};

use super::activ::{elu, elu_backward};
use super::conv::{conv2d_backward, conv2d_forward};
use super::dense::{dense_backward, dense_forward};
use super::flatten::{flatten_backward, flatten_to_sequence};
use super::loss::softmax_cross_entropy;
use super::lstm::{lstm_backward, lstm_forward, LstmLayer};
use super::pool::{maxpool_backward, maxpool_forward};
use super::tensor::Tensor;
use super::{classify_backward, forward_infer, forward_train, ModelConfig, ModelState};

pub const FD_STEP: f64 = 1e-5;
pub const REL_TOLERANCE: f64 = 1e-5;
const SCALE_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub layer: String,
    pub max_rel_err: f64,
    pub threshold: f64,
}

impl GradCheckReport {
    pub fn pass(&self) -> bool {
        self.max_rel_err < self.threshold
    }
}

fn rel_err(analytic: f64, fd: f64) -> f64 {
    (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(SCALE_FLOOR)
}

/// Central-difference check of `analytic` against the scalar map `f` over
/// the buffer `x`; returns the worst relative error.
fn fd_check(x: &mut [f64], analytic: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    assert_eq!(x.len(), analytic.len());
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + FD_STEP;
        let plus = f(x);
        x[i] = orig - FD_STEP;
        let minus = f(x);
        x[i] = orig;
        let fd = (plus - minus) / (2.0 * FD_STEP);
        worst = worst.max(rel_err(analytic[i], fd));
    }
    worst
}

fn rand_vec(rng: &CounterRng, offset: u64, len: usize, scale: f64) -> Vec<f64> {
    (0..len)
        .map(|i| (rng.unit_f64_at(offset + i as u64) - 0.5) * 2.0 * scale)
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_conv_inner(seed: u64, perturbation: f64) -> GradCheckReport {
    let rng = CounterRng::new(substream(seed, "gradcheck-conv"));
    let (c, h, w, f, k) = (2usize, 6usize, 6usize, 3usize, 3usize);
    let input = Tensor::from_vec(&[c, h, w], rand_vec(&rng, 0, c * h * w, 1.0));
    let weights = Tensor::from_vec(&[f, c, k, k], rand_vec(&rng, 1000, f * c * k * k, 0.7));
    let bias = Tensor::from_vec(&[f], rand_vec(&rng, 2000, f, 0.5));
    let proj = rand_vec(&rng, 3000, f * h * w, 1.0);

    let grad_out = Tensor::from_vec(&[f, h, w], proj.clone());
    let (gi, mut gw, gb) = conv2d_backward(&input, &weights, &grad_out).unwrap();
    gw.data_mut()[0] += perturbation;

    let loss_of = |input: &Tensor<f64>, weights: &Tensor<f64>, bias: &Tensor<f64>| {
        dot(conv2d_forward(input, weights, bias).unwrap().data(), &proj)
    };

    let mut worst = 0.0f64;
    let mut wbuf = weights.data().to_vec();
    worst = worst.max(fd_check(&mut wbuf, gw.data(), |vals| {
        loss_of(&input, &Tensor::from_vec(&[f, c, k, k], vals.to_vec()), &bias)
    }));
    let mut bbuf = bias.data().to_vec();
    worst = worst.max(fd_check(&mut bbuf, gb.data(), |vals| {
        loss_of(&input, &weights, &Tensor::from_vec(&[f], vals.to_vec()))
    }));
    let mut xbuf = input.data().to_vec();
    worst = worst.max(fd_check(&mut xbuf, gi.data(), |vals| {
        loss_of(&Tensor::from_vec(&[c, h, w], vals.to_vec()), &weights, &bias)
    }));
    GradCheckReport {
        layer: "conv2d".to_string(),
        max_rel_err: worst,
        threshold: REL_TOLERANCE,
    }
}

pub fn check_conv(seed: u64) -> GradCheckReport {
    check_conv_inner(seed, 0.0)
}

/// Negative-control fixture: injects an error into the conv weight gradient
/// so harness tests can confirm failures are caught and attributed.
#[doc(hidden)]
pub fn check_conv_perturbed(seed: u64, perturbation: f64) -> GradCheckReport {
    check_conv_inner(seed, perturbation)
}

pub fn check_elu(seed: u64) -> GradCheckReport {
    let rng = CounterRng::new(substream(seed, "gradcheck-elu"));
    let n = 32;
    let x = Tensor::from_vec(&[n], rand_vec(&rng, 0, n, 2.0));
    let proj = rand_vec(&rng, 500, n, 1.0);
    let out = elu(&x);
    let grad = elu_backward(&out, &Tensor::from_vec(&[n], proj.clone()));
    let mut buf = x.data().to_vec();
    let worst = fd_check(&mut buf, grad.data(), |vals| {
        dot(elu(&Tensor::from_vec(&[n], vals.to_vec())).data(), &proj)
    });
    GradCheckReport {
        layer: "elu".to_string(),
        max_rel_err: worst,
        threshold: REL_TOLERANCE,
    }
}

pub fn check_pool(seed: u64) -> GradCheckReport {
    let rng = CounterRng::new(substream(seed, "gradcheck-pool"));
    let (c, h, w) = (2usize, 7usize, 7usize);
    let x = Tensor::from_vec(&[c, h, w], rand_vec(&rng, 0, c * h * w, 1.0));
    let proj = rand_vec(&rng, 700, c * 2 * 2, 1.0);
    let (_, trace) = maxpool_forward(&x).unwrap();
    let grad = maxpool_backward(&trace, &Tensor::from_vec(&[c, 2, 2], proj.clone())).unwrap();
    let mut buf = x.data().to_vec();
    let worst = fd_check(&mut buf, grad.data(), |vals| {
        let t = Tensor::from_vec(&[c, h, w], vals.to_vec());
        let (out, _) = maxpool_forward(&t).unwrap();
        dot(out.data(), &proj)
    });
    GradCheckReport {
        layer: "maxpool".to_string(),
        max_rel_err: worst,
        threshold: REL_TOLERANCE,
    }
}

pub fn check_flatten(seed: u64) -> GradCheckReport {
    let rng = CounterRng::new(substream(seed, "gradcheck-flatten"));
    let (c, h, w) = (3usize, 3usize, 3usize);
    let window = 5;
    let x = Tensor::from_vec(&[c, h, w], rand_vec(&rng, 0, c * h * w, 1.0));
    let proj = rand_vec(&rng, 900, window * c, 1.0);
    let seq = flatten_to_sequence(&x, window).unwrap();
    let grad = flatten_backward(
        &[c, h, w],
        &Tensor::from_vec(seq.shape(), proj.clone()),
    )
    .unwrap();
    let mut buf = x.data().to_vec();
    let worst = fd_check(&mut buf, grad.data(), |vals| {
        let t = Tensor::from_vec(&[c, h, w], vals.to_vec());
        dot(flatten_to_sequence(&t, window).unwrap().data(), &proj)
    });
    GradCheckReport {
        layer: "flatten".to_string(),
        max_rel_err: worst,
        threshold: REL_TOLERANCE,
    }
}

pub fn check_dense(seed: u64) -> GradCheckReport {
    let rng = CounterRng::new(substream(seed, "gradcheck-dense"));
    let (k, c) = (4usize, 6usize);
    let x = Tensor::from_vec(&[c], rand_vec(&rng, 0, c, 1.0));
    let w = Tensor::from_vec(&[k, c], rand_vec(&rng, 100, k * c, 0.8));
    let b = Tensor::from_vec(&[k], rand_vec(&rng, 200, k, 0.5));
    let proj = rand_vec(&rng, 300, k, 1.0);
    let grad_out = Tensor::from_vec(&[k], proj.clone());
    let (gx, gw, gb) = dense_backward(&x, &w, &grad_out).unwrap();

    let mut worst = 0.0f64;
    let mut buf = x.data().to_vec();
    worst = worst.max(fd_check(&mut buf, gx.data(), |vals| {
        dot(
            dense_forward(&Tensor::from_vec(&[c], vals.to_vec()), &w, &b)
                .unwrap()
                .data(),
            &proj,
        )
    }));
    let mut buf = w.data().to_vec();
    worst = worst.max(fd_check(&mut buf, gw.data(), |vals| {
        dot(
            dense_forward(&x, &Tensor::from_vec(&[k, c], vals.to_vec()), &b)
                .unwrap()
                .data(),
            &proj,
        )
    }));
    let mut buf = b.data().to_vec();
    worst = worst.max(fd_check(&mut buf, gb.data(), |vals| {
        dot(
            dense_forward(&x, &w, &Tensor::from_vec(&[k], vals.to_vec()))
                .unwrap()
                .data(),
            &proj,
        )
    }));
    GradCheckReport {
        layer: "dense".to_string(),
        max_rel_err: worst,
        threshold: REL_TOLERANCE,
    }
}

fn random_lstm_layer(rng: &CounterRng, offset: u64, c: usize, hidden: usize) -> LstmLayer<f64> {
    let mut layer = LstmLayer::zeros(c, hidden);
    let w = rand_vec(rng, offset, 4 * hidden * c, 0.6);
    layer.w.data_mut().copy_from_slice(&w);
    let u = rand_vec(rng, offset + 10_000, 4 * hidden * hidden, 0.6);
    layer.u.data_mut().copy_from_slice(&u);
    let b = rand_vec(rng, offset + 20_000, 4 * hidden, 0.4);
    layer.b.data_mut().copy_from_slice(&b);
    layer
}

/// BPTT through a stack of `depth` layers over `steps` timesteps; checks
/// every gate path (packed W/U/b rows cover i, f, g, o) plus the input
/// sequence gradient.
fn check_lstm_stack(seed: u64, depth: usize, steps: usize, name: &str) -> GradCheckReport {
    let rng = CounterRng::new(substream(seed, "gradcheck-lstm"));
    let (c, hidden) = (3usize, 4usize);
    let mut layers = Vec::new();
    for l in 0..depth {
        let fan_in = if l == 0 { c } else { hidden };
        layers.push(random_lstm_layer(&rng, (l as u64 + 1) * 100_000, fan_in, hidden));
    }
    let seq = Tensor::from_vec(&[steps, c], rand_vec(&rng, 0, steps * c, 1.0));
    let proj = rand_vec(&rng, 50_000, hidden, 1.0);

    let (h_final, trace) = lstm_forward(&layers, &seq, 0.0, false, 0).unwrap();
    assert_eq!(h_final.shape(), &[hidden]);
    let grad_h = Tensor::from_vec(&[hidden], proj.clone());
    let (grads, grad_seq) = lstm_backward(&layers, &trace, &grad_h).unwrap();

    let loss_of = |layers: &[LstmLayer<f64>], seq: &Tensor<f64>| {
        let (h, _) = lstm_forward(layers, seq, 0.0, false, 0).unwrap();
        dot(h.data(), &proj)
    };

    let mut worst = 0.0f64;
    for l in 0..depth {
        for part in 0..3 {
            let (shape, analytic): (Vec<usize>, Vec<f64>) = match part {
                0 => (layers[l].w.shape().to_vec(), grads[l].w.data().to_vec()),
                1 => (layers[l].u.shape().to_vec(), grads[l].u.data().to_vec()),
                _ => (layers[l].b.shape().to_vec(), grads[l].b.data().to_vec()),
            };
            let mut buf = match part {
                0 => layers[l].w.data().to_vec(),
                1 => layers[l].u.data().to_vec(),
                _ => layers[l].b.data().to_vec(),
            };
            worst = worst.max(fd_check(&mut buf, &analytic, |vals| {
                let mut mutated = layers.clone();
                let t = Tensor::from_vec(&shape, vals.to_vec());
                match part {
                    0 => mutated[l].w = t,
                    1 => mutated[l].u = t,
                    _ => mutated[l].b = t,
                }
                loss_of(&mutated, &seq)
            }));
        }
    }
    let mut buf = seq.data().to_vec();
    worst = worst.max(fd_check(&mut buf, grad_seq.data(), |vals| {
        loss_of(&layers, &Tensor::from_vec(&[steps, c], vals.to_vec()))
    }));
    GradCheckReport {
        layer: name.to_string(),
        max_rel_err: worst,
        threshold: REL_TOLERANCE,
    }
}

pub fn check_lstm_cell(seed: u64) -> GradCheckReport {
    check_lstm_stack(seed, 1, 4, "lstm_cell_bptt")
}

pub fn check_lstm_deep(seed: u64) -> GradCheckReport {
    check_lstm_stack(seed, 2, 4, "lstm_stack")
}

pub fn check_loss(seed: u64) -> GradCheckReport {
    let rng = CounterRng::new(substream(seed, "gradcheck-loss"));
    let k = 5;
    let logits = Tensor::from_vec(&[k], rand_vec(&rng, 0, k, 2.0));
    let label = 2usize;
    let (_, grad) = softmax_cross_entropy(&logits, label).unwrap();
    let mut buf = logits.data().to_vec();
    let worst = fd_check(&mut buf, grad.data(), |vals| {
        let (loss, _) =
            softmax_cross_entropy(&Tensor::from_vec(&[k], vals.to_vec()), label).unwrap();
        loss
    });
    GradCheckReport {
        layer: "softmax_cross_entropy".to_string(),
        max_rel_err: worst,
        threshold: REL_TOLERANCE,
    }
}

/// Finite differences through the entire conv/pool/LSTM/dense composition
/// against [`classify_backward`], over every parameter tensor.
pub fn check_composed(seed: u64) -> GradCheckReport {
    let config = ModelConfig {
        conv_filters: [2, 2, 2],
        conv_kernel: 3,
        lstm_hidden: 4,
        lstm_depth: 3,
        dropout: 0.0,
        classes: 3,
        ..ModelConfig::cnn_lstm3(3, seed)
    };
    // 54 -> 18 -> 6 -> 2 through the pools, so the LSTM sees 4 timesteps.
    let side = 54;
    let state = ModelState::<f64>::init(&config, 2, substream(seed, "gradcheck-net")).unwrap();
    let rng = CounterRng::new(substream(seed, "gradcheck-net-input"));
    let input = Tensor::from_vec(&[2, side, side], rand_vec(&rng, 0, 2 * side * side, 1.0));
    let label = 1usize;

    let (logits, trace) = forward_train(&state, &input, 0).unwrap();
    let (_, grad_logits) = softmax_cross_entropy(&logits, label).unwrap();
    let grads = classify_backward(&state, &trace, &grad_logits).unwrap();

    let loss_of = |state: &ModelState<f64>| {
        let logits = forward_infer(state, &input).unwrap();
        let (loss, _) = softmax_cross_entropy(&logits, label).unwrap();
        loss
    };

    let mut worst = 0.0f64;
    let mut probe = state.clone();
    let num_tensors = grads.tensors.len();
    for t_idx in 0..num_tensors {
        let len = grads.tensors[t_idx].len();
        for e_idx in 0..len {
            let orig = probe.params()[t_idx].data()[e_idx];
            probe.params_mut()[t_idx].data_mut()[e_idx] = orig + FD_STEP;
            let plus = loss_of(&probe);
            probe.params_mut()[t_idx].data_mut()[e_idx] = orig - FD_STEP;
            let minus = loss_of(&probe);
            probe.params_mut()[t_idx].data_mut()[e_idx] = orig;
            let fd = (plus - minus) / (2.0 * FD_STEP);
            worst = worst.max(rel_err(grads.tensors[t_idx].data()[e_idx], fd));
        }
    }
    GradCheckReport {
        layer: "composed_cnn_lstm".to_string(),
        max_rel_err: worst,
        threshold: REL_TOLERANCE,
    }
}

/// Every layer check plus the composed network, in a fixed order.
pub fn run_all(seed: u64) -> Vec<GradCheckReport> {
    vec![
        check_conv(seed),
        check_elu(seed),
        check_pool(seed),
        check_flatten(seed),
        check_dense(seed),
        check_lstm_cell(seed),
        check_lstm_deep(seed),
        check_loss(seed),
        check_composed(seed),
    ]
}
