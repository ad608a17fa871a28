//! From-scratch differentiable CNN-LSTM classifier.
//!
//! Architecture: three (conv 9x9 same-pad -> ELU -> 3x3/3 max-pool) stages,
//! a flatten-to-sequence bridge, a stacked LSTM, and a dense softmax head.
//! Exact analytic gradients throughout; every kernel is verified against
//! finite differences in [`gradcheck`].

pub mod activ;
pub mod adam;
pub mod checkpoint;
pub mod conv;
pub mod dense;
pub mod flatten;
pub mod gradcheck;
pub mod loss;
pub mod lstm;
pub mod pool;
pub mod tensor;
pub mod train;

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::{chacha, substream};

use activ::{elu, elu_backward};
use adam::Moments;
use conv::{conv2d_backward, conv2d_forward};
use dense::{dense_backward, dense_forward};
use flatten::{flatten_backward, flatten_to_sequence};
use lstm::{lstm_backward, lstm_forward, LstmLayer, LstmTrace};
use pool::{maxpool_backward, maxpool_forward, PoolTrace};
use tensor::{Scalar, Tensor};

pub const NUM_CONV_STAGES: usize = 3;

#[derive(Debug)]
pub enum NnError {
    ShapeMismatch(String),
    /// A pooling stage would receive a spatial side below its kernel.
    InputTooSmall { height: usize, width: usize },
    LabelOutOfRange { label: usize, classes: usize },
    NonFiniteGradient,
    EmptyDataset,
    BadConfig(String),
    BadFormat(String),
    Io(std::io::Error),
}

impl fmt::Display for NnError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::ShapeMismatch(msg) => write!(f, "shape mismatch: {msg}"),
            Self::InputTooSmall { height, width } => {
                write!(f, "pooling input {height}x{width} smaller than 3x3 kernel")
            }
            Self::LabelOutOfRange { label, classes } => {
                write!(f, "label {label} out of range for {classes} classes")
            }
            Self::NonFiniteGradient => write!(f, "non-finite gradient"),
            Self::EmptyDataset => write!(f, "dataset is empty"),
            Self::BadConfig(msg) => write!(f, "bad model config: {msg}"),
            Self::BadFormat(msg) => write!(f, "bad checkpoint: {msg}"),
            Self::Io(e) => write!(f, "I/O error: {e}"),
        }
    }
}

impl std::error::Error for NnError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Self::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for NnError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e)
    }
}

/// Hyperparameters. Defaults reproduce the CNN-LSTM-3 configuration:
/// conv filters [32, 64, 128] with 9x9 kernels, 3x3/3 max pooling, an LSTM
/// with 512 units, depth 3, dropout 0.3 and window 200, trained for 200
/// epochs at batch 64 with Adam at learning rate 0.001.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub conv_filters: [usize; 3],
    pub conv_kernel: usize,
    pub pool_kernel: usize,
    pub pool_stride: usize,
    pub lstm_hidden: usize,
    pub lstm_depth: usize,
    pub dropout: f64,
    pub window: usize,
    pub classes: usize,
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub seed: u64,
}

impl ModelConfig {
    /// The CNN-LSTM-3 configuration.
    pub fn cnn_lstm3(classes: usize, seed: u64) -> Self {
        Self {
            conv_filters: [32, 64, 128],
            conv_kernel: 9,
            pool_kernel: pool::POOL_KERNEL,
            pool_stride: pool::POOL_STRIDE,
            lstm_hidden: 512,
            lstm_depth: 3,
            dropout: 0.3,
            window: 200,
            classes,
            epochs: 200,
            batch: 64,
            lr: 0.001,
            seed,
        }
    }

    /// Desk-scale preset: filters [4, 8, 8], hidden 16, 20 epochs. Batch,
    /// learning rate, and dropout are rescaled with the capacity (a 0.3
    /// inter-layer dropout on 16 hidden units starves optimization at this
    /// size).
    pub fn small(classes: usize, seed: u64) -> Self {
        Self {
            conv_filters: [4, 8, 8],
            lstm_hidden: 16,
            epochs: 20,
            batch: 8,
            lr: 0.002,
            dropout: 0.0,
            ..Self::cnn_lstm3(classes, seed)
        }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        if self.lstm_hidden == 0 || self.lstm_depth == 0 {
            return Err(NnError::BadConfig(
                "lstm_hidden and lstm_depth must be >= 1".to_string(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(NnError::BadConfig(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        if self.window == 0 {
            return Err(NnError::BadConfig("window must be >= 1".to_string()));
        }
        if self.conv_kernel % 2 == 0 {
            return Err(NnError::BadConfig(format!(
                "conv kernel {} must be odd",
                self.conv_kernel
            )));
        }
        if self.pool_kernel != pool::POOL_KERNEL || self.pool_stride != pool::POOL_STRIDE {
            return Err(NnError::BadConfig(format!(
                "pooling is fixed at kernel {} stride {}",
                pool::POOL_KERNEL,
                pool::POOL_STRIDE
            )));
        }
        if self.classes < 2 {
            return Err(NnError::BadConfig("need at least 2 classes".to_string()));
        }
        if self.batch == 0 || self.epochs == 0 {
            return Err(NnError::BadConfig(
                "batch and epochs must be >= 1".to_string(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer<S: Scalar> {
    pub w: Tensor<S>,
    pub b: Tensor<S>,
}

/// All learnable parameters plus Adam moments and the shared step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState<S: Scalar> {
    pub config: ModelConfig,
    pub input_channels: usize,
    pub conv: Vec<ConvLayer<S>>,
    pub lstm: Vec<LstmLayer<S>>,
    pub dense_w: Tensor<S>,
    pub dense_b: Tensor<S>,
    pub moments: Vec<Moments<S>>,
    pub step: u64,
}

fn glorot_uniform<S: Scalar>(
    tensor: &mut Tensor<S>,
    fan_in: usize,
    fan_out: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for v in tensor.data_mut() {
        *v = S::from_f64(rng.gen_range(-limit..limit));
    }
}

impl<S: Scalar> ModelState<S> {
    /// Seeded initialization: conv/dense/LSTM weights uniform on
    /// +-sqrt(6/(fan_in+fan_out)), forget-gate bias 1, other biases 0.
    pub fn init(config: &ModelConfig, input_channels: usize, seed: u64) -> Result<Self, NnError> {
        config.validate()?;
        let mut rng = chacha(substream(seed, "init"));
        let k = config.conv_kernel;

        let mut conv = Vec::with_capacity(NUM_CONV_STAGES);
        let mut c_in = input_channels;
        for &f in &config.conv_filters {
            let mut w = Tensor::zeros(&[f, c_in, k, k]);
            glorot_uniform(&mut w, c_in * k * k, f * k * k, &mut rng);
            conv.push(ConvLayer {
                w,
                b: Tensor::zeros(&[f]),
            });
            c_in = f;
        }

        let mut lstm = Vec::with_capacity(config.lstm_depth);
        let hidden = config.lstm_hidden;
        let mut feat = config.conv_filters[NUM_CONV_STAGES - 1];
        for _ in 0..config.lstm_depth {
            let mut layer = LstmLayer::zeros(feat, hidden);
            glorot_uniform(&mut layer.w, feat, hidden, &mut rng);
            glorot_uniform(&mut layer.u, hidden, hidden, &mut rng);
            // Forget-gate rows are [hidden, 2*hidden).
            for j in 0..hidden {
                layer.b.data_mut()[hidden + j] = S::one();
            }
            lstm.push(layer);
            feat = hidden;
        }

        let mut dense_w = Tensor::zeros(&[config.classes, hidden]);
        glorot_uniform(&mut dense_w, hidden, config.classes, &mut rng);
        let dense_b = Tensor::zeros(&[config.classes]);

        let mut state = Self {
            config: config.clone(),
            input_channels,
            conv,
            lstm,
            dense_w,
            dense_b,
            moments: Vec::new(),
            step: 0,
        };
        state.moments = state.params().into_iter().map(Moments::zeros_like).collect();
        Ok(state)
    }

    /// Parameter tensors in the canonical visit order used by gradients,
    /// Adam moments, and checkpoints.
    pub fn params(&self) -> Vec<&Tensor<S>> {
        let mut out = Vec::new();
        for layer in &self.conv {
            out.push(&layer.w);
            out.push(&layer.b);
        }
        for layer in &self.lstm {
            out.push(&layer.w);
            out.push(&layer.u);
            out.push(&layer.b);
        }
        out.push(&self.dense_w);
        out.push(&self.dense_b);
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<S>> {
        let mut out: Vec<&mut Tensor<S>> = Vec::new();
        for layer in self.conv.iter_mut() {
            out.push(&mut layer.w);
            out.push(&mut layer.b);
        }
        for layer in self.lstm.iter_mut() {
            out.push(&mut layer.w);
            out.push(&mut layer.u);
            out.push(&mut layer.b);
        }
        out.push(&mut self.dense_w);
        out.push(&mut self.dense_b);
        out
    }

    pub fn param_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for i in 0..self.conv.len() {
            out.push(format!("conv{}.weight", i + 1));
            out.push(format!("conv{}.bias", i + 1));
        }
        for i in 0..self.lstm.len() {
            out.push(format!("lstm{i}.w"));
            out.push(format!("lstm{i}.u"));
            out.push(format!("lstm{i}.b"));
        }
        out.push("dense.weight".to_string());
        out.push("dense.bias".to_string());
        out
    }

    pub fn cast<T: Scalar>(&self) -> ModelState<T> {
        ModelState {
            config: self.config.clone(),
            input_channels: self.input_channels,
            conv: self
                .conv
                .iter()
                .map(|l| ConvLayer {
                    w: l.w.cast(),
                    b: l.b.cast(),
                })
                .collect(),
            lstm: self
                .lstm
                .iter()
                .map(|l| LstmLayer {
                    w: l.w.cast(),
                    u: l.u.cast(),
                    b: l.b.cast(),
                })
                .collect(),
            dense_w: self.dense_w.cast(),
            dense_b: self.dense_b.cast(),
            moments: self
                .moments
                .iter()
                .map(|m| Moments {
                    m: m.m.cast(),
                    v: m.v.cast(),
                })
                .collect(),
            step: self.step,
        }
    }

    /// One Adam step over every parameter tensor; increments the shared
    /// step counter.
    pub fn apply_adam(&mut self, grads: &Grads<S>, lr: f64) -> Result<(), NnError> {
        self.step += 1;
        let step = self.step;
        let ModelState {
            conv,
            lstm,
            dense_w,
            dense_b,
            moments,
            ..
        } = self;
        let mut params: Vec<&mut Tensor<S>> = Vec::new();
        for layer in conv.iter_mut() {
            params.push(&mut layer.w);
            params.push(&mut layer.b);
        }
        for layer in lstm.iter_mut() {
            params.push(&mut layer.w);
            params.push(&mut layer.u);
            params.push(&mut layer.b);
        }
        params.push(dense_w);
        params.push(dense_b);
        if params.len() != grads.tensors.len() || params.len() != moments.len() {
            return Err(NnError::ShapeMismatch(format!(
                "parameter/gradient/moment count mismatch: {} vs {} vs {}",
                params.len(),
                grads.tensors.len(),
                moments.len()
            )));
        }
        for ((param, moment), grad) in params.into_iter().zip(moments.iter_mut()).zip(&grads.tensors)
        {
            adam::adam_update_tensor(param, moment, grad, lr, step)?;
        }
        Ok(())
    }
}

/// Gradients for every parameter tensor, in the canonical visit order.
#[derive(Debug, Clone)]
pub struct Grads<S: Scalar> {
    pub tensors: Vec<Tensor<S>>,
}

impl<S: Scalar> Grads<S> {
    pub fn zeros_like(state: &ModelState<S>) -> Self {
        Self {
            tensors: state.params().iter().map(|t| t.zeros_like()).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Grads<S>) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            for (x, y) in a.data_mut().iter_mut().zip(b.data()) {
                *x = *x + *y;
            }
        }
    }

    pub fn scale(&mut self, factor: S) {
        for t in self.tensors.iter_mut() {
            for v in t.data_mut() {
                *v = *v * factor;
            }
        }
    }
}

/// Cached activations for one training forward pass.
pub struct ForwardTrace<S: Scalar> {
    stage_inputs: Vec<Tensor<S>>,
    elu_outputs: Vec<Tensor<S>>,
    pool_traces: Vec<PoolTrace>,
    final_fmap_shape: [usize; 3],
    lstm_trace: LstmTrace<S>,
    h_final: Tensor<S>,
}

struct ForwardTraceBuilder<S: Scalar> {
    stage_inputs: Vec<Tensor<S>>,
    elu_outputs: Vec<Tensor<S>>,
    pool_traces: Vec<PoolTrace>,
}

fn run_stages<S: Scalar>(
    state: &ModelState<S>,
    input: &Tensor<S>,
    mut observe: Option<&mut ForwardTraceBuilder<S>>,
) -> Result<Tensor<S>, NnError> {
    if input.shape().len() != 3 || input.shape()[0] != state.input_channels {
        return Err(NnError::ShapeMismatch(format!(
            "classifier input must be [{}, H, W], found {:?}",
            state.input_channels,
            input.shape()
        )));
    }
    let mut current = input.clone();
    for layer in &state.conv {
        if let Some(builder) = observe.as_deref_mut() {
            builder.stage_inputs.push(current.clone());
        }
        let pre = conv2d_forward(&current, &layer.w, &layer.b)?;
        let act = elu(&pre);
        let (pooled, trace) = maxpool_forward(&act)?;
        if let Some(builder) = observe.as_deref_mut() {
            builder.elu_outputs.push(act);
            builder.pool_traces.push(trace);
        }
        current = pooled;
    }
    Ok(current)
}

/// Inference-only forward pass: no dropout, no trace, no state mutation.
pub fn forward_infer<S: Scalar>(
    state: &ModelState<S>,
    input: &Tensor<S>,
) -> Result<Tensor<S>, NnError> {
    let fmap = run_stages(state, input, None)?;
    let seq = flatten_to_sequence(&fmap, state.config.window)?;
    let (h_final, _) = lstm_forward(&state.lstm, &seq, 0.0, false, 0)?;
    dense_forward(&h_final, &state.dense_w, &state.dense_b)
}

/// Training forward pass: applies dropout (keyed by `mask_seed`) and caches
/// everything [`classify_backward`] needs.
pub fn forward_train<S: Scalar>(
    state: &ModelState<S>,
    input: &Tensor<S>,
    mask_seed: u64,
) -> Result<(Tensor<S>, ForwardTrace<S>), NnError> {
    let mut builder = ForwardTraceBuilder {
        stage_inputs: Vec::with_capacity(NUM_CONV_STAGES),
        elu_outputs: Vec::with_capacity(NUM_CONV_STAGES),
        pool_traces: Vec::with_capacity(NUM_CONV_STAGES),
    };
    let fmap = run_stages(state, input, Some(&mut builder))?;
    let final_fmap_shape = [fmap.shape()[0], fmap.shape()[1], fmap.shape()[2]];
    let seq = flatten_to_sequence(&fmap, state.config.window)?;
    let (h_final, lstm_trace) =
        lstm_forward(&state.lstm, &seq, state.config.dropout, true, mask_seed)?;
    let logits = dense_forward(&h_final, &state.dense_w, &state.dense_b)?;
    Ok((
        logits,
        ForwardTrace {
            stage_inputs: builder.stage_inputs,
            elu_outputs: builder.elu_outputs,
            pool_traces: builder.pool_traces,
            final_fmap_shape,
            lstm_trace,
            h_final,
        },
    ))
}

/// Exact gradients of the composed network wrt every parameter, given the
/// gradient at the logits.
pub fn classify_backward<S: Scalar>(
    state: &ModelState<S>,
    trace: &ForwardTrace<S>,
    grad_logits: &Tensor<S>,
) -> Result<Grads<S>, NnError> {
    let (grad_h, grad_dense_w, grad_dense_b) =
        dense_backward(&trace.h_final, &state.dense_w, grad_logits)?;
    let (lstm_grads, grad_seq) = lstm_backward(&state.lstm, &trace.lstm_trace, &grad_h)?;
    let mut grad_fmap = flatten_backward(&trace.final_fmap_shape, &grad_seq)?;

    let mut conv_grads: Vec<(Tensor<S>, Tensor<S>)> = Vec::with_capacity(NUM_CONV_STAGES);
    for i in (0..NUM_CONV_STAGES).rev() {
        let grad_act = maxpool_backward(&trace.pool_traces[i], &grad_fmap)?;
        let grad_pre = elu_backward(&trace.elu_outputs[i], &grad_act);
        let (grad_in, grad_w, grad_b) =
            conv2d_backward(&trace.stage_inputs[i], &state.conv[i].w, &grad_pre)?;
        conv_grads.push((grad_w, grad_b));
        grad_fmap = grad_in;
    }
    conv_grads.reverse();

    let mut tensors = Vec::new();
    for (gw, gb) in conv_grads {
        tensors.push(gw);
        tensors.push(gb);
    }
    for g in lstm_grads {
        tensors.push(g.w);
        tensors.push(g.u);
        tensors.push(g.b);
    }
    tensors.push(grad_dense_w);
    tensors.push(grad_dense_b);
    Ok(Grads { tensors })
}
