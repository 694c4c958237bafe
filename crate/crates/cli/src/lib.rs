//! Dataset IO, synthetic data generation, training, evaluation, and
//! experiment orchestration for the slip-detection models in
//! `slipnet-core`.
//!
//! The layering: `slipnet-core` holds the math (tensors, autodiff, model
//! forward passes) and stays allocation-only; this crate owns everything
//! that touches an operating system — files, CSV/JSON/PNG formats, RNG
//! seeding policy, the optimizer loop, and the `slipnet` command-line
//! tool built on top.

pub mod checkpoint;
pub mod dataset;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod images;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
