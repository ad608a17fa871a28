//! Malware family classification from opcode/API-call traces.
//!
//! The pipeline: parse whitespace-delimited traces into token sequences,
//! extract sliding-window n-grams, build BoW / TF-IDF / one-hot feature
//! vectors over a document-frequency-ranked vocabulary, assemble them into
//! a 2-channel grid, and train a from-scratch CNN-LSTM classifier. Model
//! quality is reported with confusion-matrix metrics, multi-run aggregation,
//! and one-way ANOVA comparison across models.
//!
//! See the crate `examples/` directory for one runnable example per major
//! capability, or the `opseq` binary for the subcommand surface
//! (`synth`, `ingest`, `featurize`, `train`, `eval`, `sweep-ngram`,
//! `compare`, `gradcheck`, `pipeline`).

pub mod commands;
pub mod eval;
pub mod features;
pub mod ngram;
pub mod nn;
pub mod rng;
pub mod trace;
