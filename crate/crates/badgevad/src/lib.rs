//! Voice activity detection for downsampled sociometric-badge audio.
//!
//! Sociometric badges preserve conversational privacy by transmitting one
//! average-amplitude reading per 50 ms frame (20 Hz) instead of audio. This
//! crate implements a full voice activity detector over those streams:
//!
//! - [`ingest`]: samples CSV parsing, the time-gridded volume matrix, label
//!   rasterization, clap-spike detection and alignment validation.
//! - [`features`]: leave-one-out channel differences with 3 s rolling means,
//!   sliding 60-frame windows, per-window L2 normalization and a binary
//!   dataset container.
//! - [`nn`]: a minimal deterministic 64-bit neural-network kernel (conv1d,
//!   batchnorm, LSTM with backpropagation through time, adaptive moments,
//!   finite-difference gradient checking).
//! - [`models`]: the four window-classifier architectures, built, run and
//!   serialized (`.bvm`).
//! - [`pipeline`]: class weights, stratified 5-fold cross-validation, the
//!   16-configuration selection sweep, confusion-matrix metrics, phase-wise
//!   evaluation and the causal streaming predictor.
//! - [`simulate`]: a labeled synthetic meeting generator standing in for
//!   real badge recordings.
//! - [`cli`]: the `badgevad` command-line tool over all of the above.
//!
//! Every stochastic step is driven by explicit 64-bit seeds; identical seeds
//! give byte-identical artifacts.
//!
//! The `examples/` directory shows one runnable program per capability:
//!
//! ```bash
//! cargo run --release --example simulate_meeting
//! cargo run --release --example feature_windows
//! cargo run --release --example gradient_check
//! cargo run --release --example train_and_predict
//! cargo run --release --example crossval_sweep
//! cargo run --release --example evaluate_phases
//! cargo run --release --example stream_predict
//! cargo run --release --example verify_reference_metrics
//! ```

pub mod cli;
pub mod error;
pub mod features;
pub mod ingest;
pub mod models;
pub mod nn;
pub mod pipeline;
pub mod simulate;

pub use error::{Error, Result};
