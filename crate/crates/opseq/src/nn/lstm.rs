//! Stacked LSTM with backpropagation through time.
//!
//! Gate math per step (all vectors of the hidden size H):
//!   i = sigmoid(W_i x + U_i h_prev + b_i)
//!   f = sigmoid(W_f x + U_f h_prev + b_f)
//!   g = tanh   (W_g x + U_g h_prev + b_g)
//!   o = sigmoid(W_o x + U_o h_prev + b_o)
//!   c = f (*) c_prev + i (*) g
//!   h = o (*) tanh(c)
//!
//! Gate matrices are packed row-wise in the order [i, f, g, o]. Layers
//! consume the full hidden sequence of the layer below; inverted dropout is
//! applied to inter-layer sequences only while training, with masks drawn
//! from a counter-based generator so they are reproducible and
//! thread-order-independent.

use crate::rng::CounterRng;

use super::tensor::{Scalar, Tensor};
use super::NnError;

/// One LSTM layer's parameters: packed input weights [4H, C], packed
/// recurrent weights [4H, H], packed bias [4H].
#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayer<S: Scalar> {
    pub w: Tensor<S>,
    pub u: Tensor<S>,
    pub b: Tensor<S>,
}

impl<S: Scalar> LstmLayer<S> {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        Self {
            w: Tensor::zeros(&[4 * hidden, input_dim]),
            u: Tensor::zeros(&[4 * hidden, hidden]),
            b: Tensor::zeros(&[4 * hidden]),
        }
    }

    pub fn hidden(&self) -> usize {
        self.u.shape()[1]
    }

    pub fn input_dim(&self) -> usize {
        self.w.shape()[1]
    }
}

/// Gradients with the same layout as [`LstmLayer`].
#[derive(Debug, Clone)]
pub struct LstmLayerGrads<S: Scalar> {
    pub w: Tensor<S>,
    pub u: Tensor<S>,
    pub b: Tensor<S>,
}

#[inline]
fn sigmoid<S: Scalar>(x: S) -> S {
    S::one() / (S::one() + (-x).exp())
}

/// Per-step gate activations cached for BPTT.
#[derive(Debug, Clone)]
struct StepGates<S> {
    i: Vec<S>,
    f: Vec<S>,
    g: Vec<S>,
    o: Vec<S>,
}

fn step_raw<S: Scalar>(
    layer: &LstmLayer<S>,
    x: &[S],
    h_prev: &[S],
    c_prev: &[S],
) -> (Vec<S>, Vec<S>, StepGates<S>) {
    let hidden = layer.hidden();
    let c_in = layer.input_dim();
    debug_assert_eq!(x.len(), c_in);
    debug_assert_eq!(h_prev.len(), hidden);

    // z = W x + U h_prev + b, packed [i, f, g, o].
    let mut z: Vec<S> = layer.b.data().to_vec();
    let w = layer.w.data();
    let u = layer.u.data();
    for (row, zr) in z.iter_mut().enumerate() {
        let wrow = &w[row * c_in..(row + 1) * c_in];
        let mut acc = *zr;
        for (wv, xv) in wrow.iter().zip(x) {
            acc = acc + *wv * *xv;
        }
        let urow = &u[row * hidden..(row + 1) * hidden];
        for (uv, hv) in urow.iter().zip(h_prev) {
            acc = acc + *uv * *hv;
        }
        *zr = acc;
    }

    let mut gates = StepGates {
        i: vec![S::zero(); hidden],
        f: vec![S::zero(); hidden],
        g: vec![S::zero(); hidden],
        o: vec![S::zero(); hidden],
    };
    for j in 0..hidden {
        gates.i[j] = sigmoid(z[j]);
        gates.f[j] = sigmoid(z[hidden + j]);
        gates.g[j] = z[2 * hidden + j].tanh();
        gates.o[j] = sigmoid(z[3 * hidden + j]);
    }

    let mut c = vec![S::zero(); hidden];
    let mut h = vec![S::zero(); hidden];
    for j in 0..hidden {
        c[j] = gates.f[j] * c_prev[j] + gates.i[j] * gates.g[j];
        h[j] = gates.o[j] * c[j].tanh();
    }
    (h, c, gates)
}

/// Single LSTM cell step: returns (h, c).
pub fn lstm_step<S: Scalar>(
    layer: &LstmLayer<S>,
    x: &Tensor<S>,
    h_prev: &Tensor<S>,
    c_prev: &Tensor<S>,
) -> Result<(Tensor<S>, Tensor<S>), NnError> {
    let hidden = layer.hidden();
    if x.shape() != [layer.input_dim()] || h_prev.shape() != [hidden] || c_prev.shape() != [hidden]
    {
        return Err(NnError::ShapeMismatch(format!(
            "lstm_step expects x[{}], h[{hidden}], c[{hidden}]; found x{:?} h{:?} c{:?}",
            layer.input_dim(),
            x.shape(),
            h_prev.shape(),
            c_prev.shape()
        )));
    }
    let (h, c, _) = step_raw(layer, x.data(), h_prev.data(), c_prev.data());
    Ok((Tensor::from_vec(&[hidden], h), Tensor::from_vec(&[hidden], c)))
}

/// Everything the backward pass needs, cached per layer per timestep.
#[derive(Debug, Clone)]
pub struct LstmTrace<S: Scalar> {
    steps: usize,
    /// Per layer: input vectors fed to that layer (after dropout), T x C.
    inputs: Vec<Vec<Vec<S>>>,
    /// Per layer: dropout scale applied to its input, if any.
    input_masks: Vec<Option<Vec<Vec<S>>>>,
    /// Per layer: hidden and cell states per step.
    hs: Vec<Vec<Vec<S>>>,
    cs: Vec<Vec<Vec<S>>>,
    gates: Vec<Vec<StepGates<S>>>,
}

impl<S: Scalar> LstmTrace<S> {
    pub fn steps(&self) -> usize {
        self.steps
    }
}

/// Inverted dropout over a [T, C] sequence: each element is zeroed with
/// probability `rate` and survivors are scaled by 1/(1-rate), so the
/// expected value equals the input. Mask bits are a pure function of
/// (seed, element counter).
pub fn inverted_dropout<S: Scalar>(
    seq: &[Vec<S>],
    rate: f64,
    rng: &CounterRng,
    counter_base: u64,
) -> (Vec<Vec<S>>, Vec<Vec<S>>) {
    let keep = 1.0 - rate;
    let scale = S::from_f64(1.0 / keep);
    let mut out = Vec::with_capacity(seq.len());
    let mut masks = Vec::with_capacity(seq.len());
    let width = seq.first().map(|r| r.len()).unwrap_or(0) as u64;
    for (t, row) in seq.iter().enumerate() {
        let mut orow = Vec::with_capacity(row.len());
        let mut mrow = Vec::with_capacity(row.len());
        for (j, &v) in row.iter().enumerate() {
            let counter = counter_base + t as u64 * width + j as u64;
            let m = if rng.unit_f64_at(counter) < rate {
                S::zero()
            } else {
                scale
            };
            mrow.push(m);
            orow.push(v * m);
        }
        out.push(orow);
        masks.push(mrow);
    }
    (out, masks)
}

/// Run the stack over a [T, C] sequence; returns the final timestep's hidden
/// state of the top layer plus the trace needed for BPTT.
///
/// Dropout applies to inter-layer sequences only, and only when `training`.
pub fn lstm_forward<S: Scalar>(
    layers: &[LstmLayer<S>],
    seq: &Tensor<S>,
    dropout: f64,
    training: bool,
    mask_seed: u64,
) -> Result<(Tensor<S>, LstmTrace<S>), NnError> {
    let (steps, feat) = match seq.shape() {
        [t, c] => (*t, *c),
        other => {
            return Err(NnError::ShapeMismatch(format!(
                "lstm input must be [T,C], found {other:?}"
            )))
        }
    };
    if steps == 0 {
        return Err(NnError::ShapeMismatch("lstm needs T >= 1".to_string()));
    }
    if layers.is_empty() {
        return Err(NnError::ShapeMismatch("lstm stack is empty".to_string()));
    }
    if layers[0].input_dim() != feat {
        return Err(NnError::ShapeMismatch(format!(
            "layer 0 expects {} features, sequence has {feat}",
            layers[0].input_dim()
        )));
    }

    let rng = CounterRng::new(mask_seed);
    let mut trace = LstmTrace {
        steps,
        inputs: Vec::with_capacity(layers.len()),
        input_masks: Vec::with_capacity(layers.len()),
        hs: Vec::with_capacity(layers.len()),
        cs: Vec::with_capacity(layers.len()),
        gates: Vec::with_capacity(layers.len()),
    };

    let mut current: Vec<Vec<S>> = (0..steps)
        .map(|t| seq.data()[t * feat..(t + 1) * feat].to_vec())
        .collect();

    for (idx, layer) in layers.iter().enumerate() {
        let (input_seq, mask) = if idx > 0 && training && dropout > 0.0 {
            // Counter space partitioned per layer so masks never collide.
            let base = (idx as u64) << 40;
            let (dropped, masks) = inverted_dropout(&current, dropout, &rng, base);
            (dropped, Some(masks))
        } else {
            (current, None)
        };

        let hidden = layer.hidden();
        let mut hs = Vec::with_capacity(steps);
        let mut cs = Vec::with_capacity(steps);
        let mut gates = Vec::with_capacity(steps);
        let mut h = vec![S::zero(); hidden];
        let mut c = vec![S::zero(); hidden];
        for row in &input_seq {
            let (nh, nc, g) = step_raw(layer, row, &h, &c);
            hs.push(nh.clone());
            cs.push(nc.clone());
            gates.push(g);
            h = nh;
            c = nc;
        }
        current = hs.clone();
        trace.inputs.push(input_seq);
        trace.input_masks.push(mask);
        trace.hs.push(hs);
        trace.cs.push(cs);
        trace.gates.push(gates);
    }

    let top = trace.hs.last().unwrap().last().unwrap().clone();
    Ok((Tensor::from_vec(&[top.len()], top), trace))
}

/// BPTT through the whole stack given the gradient at the final top hidden
/// state. Returns per-layer parameter gradients plus the gradient wrt the
/// input sequence.
pub fn lstm_backward<S: Scalar>(
    layers: &[LstmLayer<S>],
    trace: &LstmTrace<S>,
    grad_h_final: &Tensor<S>,
) -> Result<(Vec<LstmLayerGrads<S>>, Tensor<S>), NnError> {
    let steps = trace.steps;
    let top_hidden = layers.last().unwrap().hidden();
    if grad_h_final.shape() != [top_hidden] {
        return Err(NnError::ShapeMismatch(format!(
            "grad_h_final must be [{top_hidden}], found {:?}",
            grad_h_final.shape()
        )));
    }

    // External gradient flowing into each layer's hidden sequence. For the
    // top layer only the final step receives one.
    let mut ext: Vec<Vec<S>> = vec![vec![S::zero(); top_hidden]; steps];
    ext[steps - 1].copy_from_slice(grad_h_final.data());

    let mut grads: Vec<Option<LstmLayerGrads<S>>> = (0..layers.len()).map(|_| None).collect();
    let mut grad_input_seq: Option<Vec<Vec<S>>> = None;

    for idx in (0..layers.len()).rev() {
        let layer = &layers[idx];
        let hidden = layer.hidden();
        let c_in = layer.input_dim();
        let inputs = &trace.inputs[idx];
        let hs = &trace.hs[idx];
        let cs = &trace.cs[idx];
        let gates = &trace.gates[idx];

        let mut gw = Tensor::zeros(&[4 * hidden, c_in]);
        let mut gu = Tensor::zeros(&[4 * hidden, hidden]);
        let mut gb = Tensor::zeros(&[4 * hidden]);
        let mut dx_seq: Vec<Vec<S>> = vec![vec![S::zero(); c_in]; steps];

        let mut dh_next = vec![S::zero(); hidden];
        let mut dc_next = vec![S::zero(); hidden];
        for t in (0..steps).rev() {
            let g = &gates[t];
            let c_t = &cs[t];
            let c_prev: &[S] = if t > 0 { &cs[t - 1] } else { &[] };
            let h_prev: &[S] = if t > 0 { &hs[t - 1] } else { &[] };

            // dz packed [i, f, g, o].
            let mut dz = vec![S::zero(); 4 * hidden];
            let mut dc_prev = vec![S::zero(); hidden];
            for j in 0..hidden {
                let dh = ext[t][j] + dh_next[j];
                let tc = c_t[j].tanh();
                let do_ = dh * tc;
                let mut dc = dc_next[j] + dh * g.o[j] * (S::one() - tc * tc);
                let cp = if t > 0 { c_prev[j] } else { S::zero() };
                let df = dc * cp;
                let di = dc * g.g[j];
                let dg = dc * g.i[j];
                dc = dc * g.f[j];
                dc_prev[j] = dc;
                dz[j] = di * g.i[j] * (S::one() - g.i[j]);
                dz[hidden + j] = df * g.f[j] * (S::one() - g.f[j]);
                dz[2 * hidden + j] = dg * (S::one() - g.g[j] * g.g[j]);
                dz[3 * hidden + j] = do_ * g.o[j] * (S::one() - g.o[j]);
            }

            // Parameter and input gradients from dz.
            let x = &inputs[t];
            let gw_data = gw.data_mut();
            for (row, &dzr) in dz.iter().enumerate() {
                if dzr == S::zero() {
                    continue;
                }
                let wrow = &mut gw_data[row * c_in..(row + 1) * c_in];
                for (gwv, xv) in wrow.iter_mut().zip(x) {
                    *gwv = *gwv + dzr * *xv;
                }
            }
            if t > 0 {
                let gu_data = gu.data_mut();
                for (row, &dzr) in dz.iter().enumerate() {
                    if dzr == S::zero() {
                        continue;
                    }
                    let urow = &mut gu_data[row * hidden..(row + 1) * hidden];
                    for (guv, hv) in urow.iter_mut().zip(h_prev) {
                        *guv = *guv + dzr * *hv;
                    }
                }
            }
            for (gbv, &dzr) in gb.data_mut().iter_mut().zip(&dz) {
                *gbv = *gbv + dzr;
            }

            // dx_t = W^T dz; dh_prev = U^T dz.
            let w = layer.w.data();
            let dx = &mut dx_seq[t];
            for (row, &dzr) in dz.iter().enumerate() {
                if dzr == S::zero() {
                    continue;
                }
                let wrow = &w[row * c_in..(row + 1) * c_in];
                for (dxv, wv) in dx.iter_mut().zip(wrow) {
                    *dxv = *dxv + dzr * *wv;
                }
            }
            let mut dh_prev = vec![S::zero(); hidden];
            if t > 0 {
                let u = layer.u.data();
                for (row, &dzr) in dz.iter().enumerate() {
                    if dzr == S::zero() {
                        continue;
                    }
                    let urow = &u[row * hidden..(row + 1) * hidden];
                    for (dhv, uv) in dh_prev.iter_mut().zip(urow) {
                        *dhv = *dhv + dzr * *uv;
                    }
                }
            }
            dh_next = dh_prev;
            dc_next = dc_prev;
        }

        grads[idx] = Some(LstmLayerGrads {
            w: gw,
            u: gu,
            b: gb,
        });

        // Gradient flowing into the layer below: undo the dropout scaling,
        // then treat it as external gradient on that layer's hidden states.
        if idx > 0 {
            let mut below = dx_seq;
            if let Some(masks) = &trace.input_masks[idx] {
                for (row, mrow) in below.iter_mut().zip(masks) {
                    for (v, m) in row.iter_mut().zip(mrow) {
                        *v = *v * *m;
                    }
                }
            }
            ext = below;
        } else {
            let mut seq = dx_seq;
            if let Some(masks) = &trace.input_masks[0] {
                for (row, mrow) in seq.iter_mut().zip(masks) {
                    for (v, m) in row.iter_mut().zip(mrow) {
                        *v = *v * *m;
                    }
                }
            }
            grad_input_seq = Some(seq);
        }
    }

    let grad_seq_rows = grad_input_seq.unwrap();
    let c_in = layers[0].input_dim();
    let mut flat = Vec::with_capacity(steps * c_in);
    for row in grad_seq_rows {
        flat.extend(row);
    }
    Ok((
        grads.into_iter().map(Option::unwrap).collect(),
        Tensor::from_vec(&[steps, c_in], flat),
    ))
}
