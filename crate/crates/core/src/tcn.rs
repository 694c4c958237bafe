//! Temporal convolutional stacks: plain TCN and multi-scale TCN (MS-TCN).
//!
//! An MS-TCN layer runs n parallel causal conv branches at different
//! dilations over the same input and concatenates their channel blocks; a
//! TCN layer is the single-branch special case with dilation doubling across
//! layers. Both keep the time length unchanged, so stacks compose freely.
//!
//! When the requested output width does not divide evenly across branches,
//! channels split near-evenly: the first (C mod n) branches carry one extra
//! channel. With C divisible by n this is exactly C/n each.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::init::{fan_in_uniform, zero_bias};
use crate::tensor::Tensor;

/// Post-layer nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Activation {
    Relu,
    Identity,
}

/// One multi-scale layer: `kernels[j]` and `dilations[j]` describe branch j.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MsTcnLayerConfig {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernels: Vec<usize>,
    pub dilations: Vec<usize>,
}

impl MsTcnLayerConfig {
    /// Layer with `branches` equal-kernel branches at dilations 1, 2, 4, ...
    pub fn uniform(
        in_channels: usize,
        out_channels: usize,
        branches: usize,
        kernel: usize,
    ) -> MsTcnLayerConfig {
        MsTcnLayerConfig {
            in_channels,
            out_channels,
            kernels: (0..branches).map(|_| kernel).collect(),
            dilations: (0..branches).map(|j| 1usize << j).collect(),
        }
    }

    pub fn branches(&self) -> usize {
        self.kernels.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.kernels.len();
        if n == 0 || self.dilations.len() != n {
            return Err(Error::InvalidConfig {
                detail: format!(
                    "layer needs matching non-empty kernel/dilation lists, got {} kernels and {} dilations",
                    n,
                    self.dilations.len()
                ),
            });
        }
        if self.in_channels == 0 || self.out_channels == 0 {
            return Err(Error::InvalidConfig {
                detail: format!(
                    "layer channels must be >= 1, got {}x{}",
                    self.in_channels, self.out_channels
                ),
            });
        }
        if n > self.out_channels {
            return Err(Error::InvalidConfig {
                detail: format!(
                    "{} branches cannot share {} output channels",
                    n, self.out_channels
                ),
            });
        }
        if self.kernels.iter().any(|&k| k == 0) || self.dilations.iter().any(|&d| d == 0) {
            return Err(Error::InvalidConfig {
                detail: String::from("kernel sizes and dilations must be >= 1"),
            });
        }
        Ok(())
    }

    /// Near-even channel split across branches; sums to `out_channels`.
    pub fn branch_channels(&self) -> Vec<usize> {
        let n = self.branches();
        let base = self.out_channels / n;
        let rem = self.out_channels % n;
        (0..n).map(|j| base + usize::from(j < rem)).collect()
    }
}

/// A stack of layers plus stack-wide activation and residual switches.
/// Residual addition (off by default) applies the layer input before the
/// activation and is skipped for layers whose input/output shapes differ.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MsTcnConfig {
    pub layers: Vec<MsTcnLayerConfig>,
    pub activation: Activation,
    pub residual: bool,
}

impl MsTcnConfig {
    pub fn new(layers: Vec<MsTcnLayerConfig>) -> MsTcnConfig {
        MsTcnConfig { layers, activation: Activation::Relu, residual: false }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::InvalidConfig { detail: String::from("empty layer stack") });
        }
        for (i, layer) in self.layers.iter().enumerate() {
            layer
                .validate()
                .map_err(|e| Error::InvalidConfig { detail: format!("layer {i}: {e}") })?;
        }
        for i in 1..self.layers.len() {
            if self.layers[i].in_channels != self.layers[i - 1].out_channels {
                return Err(Error::InvalidConfig {
                    detail: format!(
                        "layer {i} expects {} input channels but layer {} emits {}",
                        self.layers[i].in_channels,
                        i - 1,
                        self.layers[i - 1].out_channels
                    ),
                });
            }
        }
        Ok(())
    }

    /// True when every layer is single-branch, i.e. the stack is a plain TCN.
    pub fn is_single_branch(&self) -> bool {
        self.layers.iter().all(|l| l.branches() == 1)
    }

    pub fn in_channels(&self) -> usize {
        self.layers.first().map_or(0, |l| l.in_channels)
    }

    pub fn out_channels(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_channels)
    }
}

/// Receptive field of the stack in frames: 1 + sum over layers of the widest
/// branch reach (k - 1) * d.
pub fn receptive_field(cfg: &MsTcnConfig) -> usize {
    1 + cfg
        .layers
        .iter()
        .map(|l| {
            l.kernels
                .iter()
                .zip(&l.dilations)
                .map(|(&k, &d)| (k - 1) * d)
                .max()
                .unwrap_or(0)
        })
        .sum::<usize>()
}

/// Weights of one conv branch: weight [c_j, C_in, k_j], bias [c_j].
#[derive(Debug, Clone)]
pub struct BranchWeights {
    pub weight: Tensor,
    pub bias: Tensor,
}

#[derive(Debug, Clone)]
pub struct MsTcnLayerWeights {
    pub branches: Vec<BranchWeights>,
}

#[derive(Debug, Clone)]
pub struct MsTcnWeights {
    pub layers: Vec<MsTcnLayerWeights>,
}

impl MsTcnWeights {
    /// Fan-in uniform weights, zero biases, consumed from `rng` in layer then
    /// branch order.
    pub fn init<R: Rng + ?Sized>(cfg: &MsTcnConfig, rng: &mut R) -> Result<MsTcnWeights> {
        cfg.validate()?;
        let mut layers = Vec::with_capacity(cfg.layers.len());
        for layer in &cfg.layers {
            let channels = layer.branch_channels();
            let mut branches = Vec::with_capacity(layer.branches());
            for (j, &c_j) in channels.iter().enumerate() {
                let k = layer.kernels[j];
                let fan_in = layer.in_channels * k;
                let weight = Tensor::param(
                    fan_in_uniform(rng, fan_in, c_j * layer.in_channels * k),
                    &[c_j, layer.in_channels, k],
                )?;
                let bias = Tensor::param(zero_bias(c_j), &[c_j])?;
                branches.push(BranchWeights { weight, bias });
            }
            layers.push(MsTcnLayerWeights { branches });
        }
        Ok(MsTcnWeights { layers })
    }

    /// Parameter handles in layer/branch order, named under `prefix`.
    pub fn named_tensors(&self, prefix: &str) -> Vec<(String, Tensor)> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            for (j, branch) in layer.branches.iter().enumerate() {
                out.push((format!("{prefix}.layer{i}.branch{j}.weight"), branch.weight.clone()));
                out.push((format!("{prefix}.layer{i}.branch{j}.bias"), branch.bias.clone()));
            }
        }
        out
    }
}

fn apply_activation(x: &Tensor, activation: Activation) -> Tensor {
    match activation {
        Activation::Relu => x.relu(),
        Activation::Identity => x.clone(),
    }
}

fn layer_context(op: &'static str, index: usize, e: Error) -> Error {
    Error::ShapeMismatch { op, detail: format!("layer {index}: {e}") }
}

/// Branch convolutions concatenated in branch order, before any activation.
pub(crate) fn mstcn_layer_preactivation(
    x: &Tensor,
    cfg: &MsTcnLayerConfig,
    weights: &MsTcnLayerWeights,
) -> Result<Tensor> {
    cfg.validate()?;
    if weights.branches.len() != cfg.branches() {
        return Err(Error::InvalidConfig {
            detail: format!(
                "layer has {} weight branches but config declares {}",
                weights.branches.len(),
                cfg.branches()
            ),
        });
    }
    let mut acc: Option<Tensor> = None;
    for (j, branch) in weights.branches.iter().enumerate() {
        let y = x.conv1d_causal(&branch.weight, &branch.bias, cfg.dilations[j])?;
        acc = Some(match acc {
            None => y,
            Some(prev) => prev.concat_channels(&y)?,
        });
    }
    let out = acc.expect("validated layer has at least one branch");
    if out.shape()[0] != cfg.out_channels {
        return Err(Error::ShapeMismatch {
            op: "mstcn_layer_forward",
            detail: format!(
                "branch widths sum to {} channels, config declares {}",
                out.shape()[0],
                cfg.out_channels
            ),
        });
    }
    Ok(out)
}

/// One MS-TCN layer: branch convs, concatenation, then the activation.
pub fn mstcn_layer_forward(
    x: &Tensor,
    cfg: &MsTcnLayerConfig,
    weights: &MsTcnLayerWeights,
    activation: Activation,
) -> Result<Tensor> {
    let pre = mstcn_layer_preactivation(x, cfg, weights)?;
    Ok(apply_activation(&pre, activation))
}

/// Full MS-TCN stack on a [C_in, T] map; output is [C_out, T].
pub fn mstcn_forward(x: &Tensor, cfg: &MsTcnConfig, weights: &MsTcnWeights) -> Result<Tensor> {
    cfg.validate()?;
    if weights.layers.len() != cfg.layers.len() {
        return Err(Error::InvalidConfig {
            detail: format!(
                "stack has {} weight layers but config declares {}",
                weights.layers.len(),
                cfg.layers.len()
            ),
        });
    }
    let mut cur = x.clone();
    for (i, (layer_cfg, layer_w)) in cfg.layers.iter().zip(&weights.layers).enumerate() {
        let mut pre = mstcn_layer_preactivation(&cur, layer_cfg, layer_w)
            .map_err(|e| layer_context("mstcn_forward", i, e))?;
        if cfg.residual && pre.shape() == cur.shape() {
            pre = pre.add(&cur).map_err(|e| layer_context("mstcn_forward", i, e))?;
        }
        cur = apply_activation(&pre, cfg.activation);
    }
    Ok(cur)
}

/// Plain TCN stack: requires every layer single-branch and runs a direct
/// conv-per-layer loop that shares no code with the multi-scale path, so the
/// two can cross-check each other.
pub fn tcn_forward(x: &Tensor, cfg: &MsTcnConfig, weights: &MsTcnWeights) -> Result<Tensor> {
    cfg.validate()?;
    if !cfg.is_single_branch() {
        return Err(Error::InvalidConfig {
            detail: String::from("tcn_forward requires single-branch layers"),
        });
    }
    if weights.layers.len() != cfg.layers.len() {
        return Err(Error::InvalidConfig {
            detail: format!(
                "stack has {} weight layers but config declares {}",
                weights.layers.len(),
                cfg.layers.len()
            ),
        });
    }
    let mut cur = x.clone();
    for (i, (layer_cfg, layer_w)) in cfg.layers.iter().zip(&weights.layers).enumerate() {
        let branch = &layer_w.branches[0];
        let mut pre = cur
            .conv1d_causal(&branch.weight, &branch.bias, layer_cfg.dilations[0])
            .map_err(|e| layer_context("tcn_forward", i, e))?;
        if cfg.residual && pre.shape() == cur.shape() {
            pre = pre.add(&cur).map_err(|e| layer_context("tcn_forward", i, e))?;
        }
        cur = apply_activation(&pre, cfg.activation);
    }
    Ok(cur)
}
