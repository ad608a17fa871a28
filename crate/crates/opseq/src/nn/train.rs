//! Mini-batch training loop with seeded shuffling and per-epoch logging.
//!
//! Per-sample gradients are always reduced in sample-index order, so the
//! result is bitwise identical whether a batch is computed serially or on a
//! rayon pool.

use rayon::prelude::*;

use crate::rng::{chacha, substream_indexed};

use super::loss::softmax_cross_entropy;
use super::tensor::{Scalar, Tensor};
use super::{classify_backward, forward_infer, forward_train, Grads, ModelConfig, ModelState, NnError};

/// One labeled training sample.
#[derive(Debug, Clone)]
pub struct Sample<S: Scalar> {
    pub label: u32,
    pub input: Tensor<S>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub train_acc: f64,
}

fn argmax<S: Scalar>(logits: &Tensor<S>) -> usize {
    let mut best = 0;
    for (i, v) in logits.data().iter().enumerate() {
        if *v > logits.data()[best] {
            best = i;
        }
    }
    best
}

fn sample_grad<S: Scalar>(
    state: &ModelState<S>,
    sample: &Sample<S>,
    mask_seed: u64,
) -> Result<(f64, bool, Grads<S>), NnError> {
    let (logits, trace) = forward_train(state, &sample.input, mask_seed)?;
    let (loss, grad_logits) = softmax_cross_entropy(&logits, sample.label as usize)?;
    let grads = classify_backward(state, &trace, &grad_logits)?;
    let correct = argmax(&logits) == sample.label as usize;
    Ok((loss.as_f64(), correct, grads))
}

/// Train a fresh model on the samples. Randomness (init, shuffle, dropout)
/// flows from `config.seed` through named substreams. `threads = 1` runs
/// fully serially.
pub fn train<S: Scalar>(
    samples: &[Sample<S>],
    config: &ModelConfig,
    input_channels: usize,
    threads: usize,
) -> Result<(ModelState<S>, Vec<EpochLog>), NnError> {
    if samples.is_empty() {
        return Err(NnError::EmptyDataset);
    }
    for s in samples {
        if s.label as usize >= config.classes {
            return Err(NnError::LabelOutOfRange {
                label: s.label as usize,
                classes: config.classes,
            });
        }
    }
    let mut state = ModelState::init(config, input_channels, config.seed)?;
    let logs = train_in_place(&mut state, samples, threads)?;
    Ok((state, logs))
}

/// Continue training an existing state (used by resume-capable runs).
pub fn train_in_place<S: Scalar>(
    state: &mut ModelState<S>,
    samples: &[Sample<S>],
    threads: usize,
) -> Result<Vec<EpochLog>, NnError> {
    if samples.is_empty() {
        return Err(NnError::EmptyDataset);
    }
    let config = state.config.clone();
    let n = samples.len();
    let mut logs = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        use rand::seq::SliceRandom;
        let mut rng = chacha(substream_indexed(config.seed, "shuffle", epoch as u64));
        order.shuffle(&mut rng);

        let mut epoch_loss_sum = 0.0;
        let mut batches = 0usize;
        let mut correct = 0usize;

        for (batch_idx, batch) in order.chunks(config.batch).enumerate() {
            let _ = batch_idx;
            // Per-sample dropout masks are keyed by the sample's position in
            // the epoch so they are independent of batching and threading.
            let results: Vec<(f64, bool, Grads<S>)> = if threads > 1 {
                batch
                    .par_iter()
                    .enumerate()
                    .map(|(k, &idx)| {
                        let pos = batches * config.batch + k;
                        let mask_seed = substream_indexed(
                            config.seed,
                            "dropout",
                            (epoch * n + pos) as u64,
                        );
                        sample_grad(state, &samples[idx], mask_seed)
                    })
                    .collect::<Result<_, _>>()?
            } else {
                batch
                    .iter()
                    .enumerate()
                    .map(|(k, &idx)| {
                        let pos = batches * config.batch + k;
                        let mask_seed = substream_indexed(
                            config.seed,
                            "dropout",
                            (epoch * n + pos) as u64,
                        );
                        sample_grad(state, &samples[idx], mask_seed)
                    })
                    .collect::<Result<_, _>>()?
            };

            let mut total = Grads::zeros_like(state);
            let mut batch_loss = 0.0;
            for (loss, ok, grads) in &results {
                batch_loss += loss;
                correct += usize::from(*ok);
                total.add_assign(grads);
            }
            let scale = S::from_f64(1.0 / batch.len() as f64);
            total.scale(scale);
            state.apply_adam(&total, config.lr)?;

            epoch_loss_sum += batch_loss / batch.len() as f64;
            batches += 1;
        }

        logs.push(EpochLog {
            epoch,
            loss: epoch_loss_sum / batches as f64,
            train_acc: correct as f64 / n as f64,
        });
    }
    Ok(logs)
}

/// Argmax predictions under the frozen state; parallel over samples when
/// `threads > 1` (order preserved).
pub fn predict<S: Scalar>(
    state: &ModelState<S>,
    samples: &[Sample<S>],
    threads: usize,
) -> Result<Vec<usize>, NnError> {
    if threads > 1 {
        samples
            .par_iter()
            .map(|s| forward_infer(state, &s.input).map(|l| argmax(&l)))
            .collect()
    } else {
        samples
            .iter()
            .map(|s| forward_infer(state, &s.input).map(|l| argmax(&l)))
            .collect()
    }
}

/// Fraction of samples whose argmax prediction matches the label.
pub fn accuracy<S: Scalar>(
    state: &ModelState<S>,
    samples: &[Sample<S>],
    threads: usize,
) -> Result<f64, NnError> {
    let preds = predict(state, samples, threads)?;
    let correct = preds
        .iter()
        .zip(samples)
        .filter(|(p, s)| **p == s.label as usize)
        .count();
    Ok(correct as f64 / samples.len() as f64)
}
