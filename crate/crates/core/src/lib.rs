//! slipnet-core: a small reverse-mode autodiff engine and the visuo-tactile
//! slip-detection model built on it.
//!
//! The crate is `no_std`-compatible (allocation required): disable default
//! features and enable `libm` for targets without a float runtime. The
//! companion `slipnet-cli` crate carries datasets, file formats, training,
//! and the command-line tool.
//!
//! Layout:
//! - [`tensor`] / [`ops`]: dense f64 tensors, the op set, reverse-mode
//!   backward with accumulate-until-zeroed gradients;
//! - [`adam`], [`init`]: optimizer and seeded initialization;
//! - [`tcn`]: causal dilated conv stacks, plain and multi-scale;
//! - [`encoders`]: per-frame tactile/visual feature extractors;
//! - [`model`]: the fused classifier, its config presets, and the parameter
//!   manifest that pins checkpoint order;
//! - [`gradcheck`]: finite-difference verification harness.
//!
//! Determinism is a design contract: given one seed, initialization,
//! training, and inference reproduce bit-identical results on any host.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod adam;
mod autograd;
pub mod encoders;
pub mod error;
pub mod gradcheck;
pub mod init;
mod math;
pub mod model;
pub mod ops;
pub mod tcn;
pub mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use encoders::{
    encode_tactile_sequence, encode_visual_sequence, tactile_encode, visual_encode,
    TactileEncoderParams, VisualEncoderParams, VisualFrame, VisualMode, FEATURE_DIM,
    TACTILE_FRAME_SHAPE, VISUAL_IMAGE_SHAPE,
};
pub use error::{Error, Result};
pub use gradcheck::{run_gradcheck, GradCheckFailure, GradCheckOutcome};
pub use model::{
    forward, forward_traced, parameter_manifest, predict, ForwardTrace, ManifestEntry, Modality,
    Prediction, Readout, SlipModelConfig, SlipModelParams, StateLabel, TemporalArch, WindowInput,
    DEFAULT_VISUAL_DIM,
};
pub use ops::{stack_columns, stack_rows};
pub use tcn::{
    mstcn_forward, mstcn_layer_forward, receptive_field, tcn_forward, Activation, BranchWeights,
    MsTcnConfig, MsTcnLayerConfig, MsTcnLayerWeights, MsTcnWeights,
};
pub use tensor::Tensor;
