//! Error type shared by the tensor engine and the model layers.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Errors produced by tensor construction, ops, and model plumbing.
///
/// Every variant carries enough context to identify the offending call site
/// without a debugger: the op name, the shapes involved, or the parameter
/// name.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Operand shapes are inconsistent with the op's contract.
    ShapeMismatch {
        op: &'static str,
        detail: String,
    },
    /// A constructor received data whose length does not match the shape.
    LengthMismatch {
        op: &'static str,
        expected: usize,
        actual: usize,
    },
    /// A constructor received a NaN or infinite value.
    NonFiniteValue {
        op: &'static str,
        index: usize,
        value: f64,
    },
    /// A structural configuration is invalid (zero channels, empty layer
    /// stack, branch lists of mismatched length, ...).
    InvalidConfig {
        detail: String,
    },
    /// A class label is outside the valid range for the logits it indexes.
    InvalidLabel {
        index: usize,
        label: usize,
        classes: usize,
    },
    /// `backward` was called on a non-scalar tensor.
    NonScalarBackward {
        shape: Vec<usize>,
    },
    /// An optimizer step saw a NaN or infinite gradient.
    NonFiniteGradient {
        param: String,
    },
    /// An optimizer step was asked to use a gradient that was never
    /// populated.
    MissingGradient {
        param: String,
    },
    /// A per-frame encoder failed on one frame of a sequence.
    FrameEncode {
        index: usize,
        detail: String,
    },
    /// The model was asked to run a modality for which the window or the
    /// parameter set carries no data.
    MissingModality {
        modality: &'static str,
        detail: String,
    },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ShapeMismatch { op, detail } => {
                write!(f, "{op}: shape mismatch: {detail}")
            }
            Error::LengthMismatch { op, expected, actual } => {
                write!(f, "{op}: data length {actual} does not match shape product {expected}")
            }
            Error::NonFiniteValue { op, index, value } => {
                write!(f, "{op}: non-finite value {value} at flat index {index}")
            }
            Error::InvalidConfig { detail } => write!(f, "invalid config: {detail}"),
            Error::InvalidLabel { index, label, classes } => {
                write!(f, "label {label} at sample {index} is out of range for {classes} classes")
            }
            Error::NonScalarBackward { shape } => {
                write!(f, "backward requires a scalar loss, got shape {shape:?}")
            }
            Error::NonFiniteGradient { param } => {
                write!(f, "non-finite gradient for parameter '{param}'")
            }
            Error::MissingGradient { param } => {
                write!(f, "parameter '{param}' has no gradient; run backward first")
            }
            Error::FrameEncode { index, detail } => {
                write!(f, "frame {index}: {detail}")
            }
            Error::MissingModality { modality, detail } => {
                write!(f, "missing {modality} input: {detail}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
