//! The full slip-detection model: per-frame encoders, per-modality temporal
//! stacks, channel fusion, a joint temporal stack, and a 2-class head.
//!
//! Data flow for the fused default (T frames per window):
//!   tactile frames -> CNN encoder -> [64, T] -> modality MS-TCN -> [64, T]
//!   visual  frames -> encoder     -> [64, T] -> modality MS-TCN -> [64, T]
//!   channel concat -> [128, T] -> fusion MS-TCN -> [64, T]
//!   readout (last step by default) -> [64] -> linear head -> [2] logits
//!
//! Single-modality configs run only their own branch and skip concatenation
//! and the fusion stack: the head reads the modality stack's readout
//! directly. Class 0 is slip, class 1 is stable; argmax ties resolve to the
//! lower index, so an exactly ambiguous window reads as slip.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use crate::encoders::{
    encode_tactile_sequence, encode_visual_sequence, TactileEncoderParams, VisualEncoderParams,
    VisualFrame, VisualMode, FEATURE_DIM,
};
use crate::error::{Error, Result};
use crate::init::{fan_in_uniform, zero_bias};
use crate::math;
use crate::ops::stack_rows;
use crate::tcn::{mstcn_forward, tcn_forward, MsTcnConfig, MsTcnLayerConfig, MsTcnWeights};
use crate::tensor::Tensor;

/// Grasp state of a window; the class indices are the label encoding used
/// everywhere (datasets, logits, confusion matrices).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StateLabel {
    Slip,
    Stable,
}

impl StateLabel {
    pub fn index(self) -> usize {
        match self {
            StateLabel::Slip => 0,
            StateLabel::Stable => 1,
        }
    }

    pub fn from_index(index: usize) -> Result<StateLabel> {
        match index {
            0 => Ok(StateLabel::Slip),
            1 => Ok(StateLabel::Stable),
            _ => Err(Error::InvalidLabel { index: 0, label: index, classes: 2 }),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            StateLabel::Slip => "slip",
            StateLabel::Stable => "stable",
        }
    }
}

impl core::fmt::Display for StateLabel {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

/// Which input streams the model consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Modality {
    TactileOnly,
    VisualOnly,
    Fused,
}

impl Modality {
    pub fn name(self) -> &'static str {
        match self {
            Modality::TactileOnly => "tactile_only",
            Modality::VisualOnly => "visual_only",
            Modality::Fused => "fused",
        }
    }
}

/// Which temporal stack runs: multi-scale layers or a plain single-branch
/// TCN (the latter requires every layer config to be single-branch).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum TemporalArch {
    MsTcn,
    Tcn,
}

/// How a [C, T] temporal output collapses to one feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Readout {
    /// Final time step; the causal stacks make it the only step that has
    /// seen the whole window.
    LastStep,
    MeanOverTime,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SlipModelConfig {
    pub modality: Modality,
    /// Window length T in frames.
    pub seq_len: usize,
    pub visual_mode: VisualMode,
    /// Freeze the visual backbone (small_cnn conv stages); projections stay
    /// trainable. No effect on passthrough, which has no backbone.
    pub visual_frozen: bool,
    pub temporal: TemporalArch,
    pub readout: Readout,
    pub tactile_tcn: MsTcnConfig,
    pub visual_tcn: MsTcnConfig,
    /// Joint stack over the concatenated streams; `None` for single-modality
    /// configs, which feed the head from their own stack.
    pub fusion_tcn: Option<MsTcnConfig>,
}

/// Default embedding width of the external visual backbone.
pub const DEFAULT_VISUAL_DIM: usize = 512;

fn modality_stack(arch: TemporalArch) -> MsTcnConfig {
    // 2 layers x 2 branches, kernel 5, 64 -> 64 channels. The plain-TCN
    // variant keeps the channel and kernel budget identical (one branch of
    // the full width has exactly as many weights as n branches of width
    // C/n) and doubles dilation across layers instead of across branches.
    match arch {
        TemporalArch::MsTcn => MsTcnConfig::new(alloc::vec![
            MsTcnLayerConfig::uniform(FEATURE_DIM, FEATURE_DIM, 2, 5),
            MsTcnLayerConfig::uniform(FEATURE_DIM, FEATURE_DIM, 2, 5),
        ]),
        TemporalArch::Tcn => MsTcnConfig::new(alloc::vec![
            MsTcnLayerConfig {
                in_channels: FEATURE_DIM,
                out_channels: FEATURE_DIM,
                kernels: alloc::vec![5],
                dilations: alloc::vec![1],
            },
            MsTcnLayerConfig {
                in_channels: FEATURE_DIM,
                out_channels: FEATURE_DIM,
                kernels: alloc::vec![5],
                dilations: alloc::vec![2],
            },
        ]),
    }
}

fn fusion_stack(arch: TemporalArch, in_channels: usize) -> MsTcnConfig {
    // 3 layers x 3 branches, kernel 3, -> 64 channels.
    match arch {
        TemporalArch::MsTcn => MsTcnConfig::new(alloc::vec![
            MsTcnLayerConfig::uniform(in_channels, FEATURE_DIM, 3, 3),
            MsTcnLayerConfig::uniform(FEATURE_DIM, FEATURE_DIM, 3, 3),
            MsTcnLayerConfig::uniform(FEATURE_DIM, FEATURE_DIM, 3, 3),
        ]),
        TemporalArch::Tcn => MsTcnConfig::new(
            [1usize, 2, 4]
                .iter()
                .enumerate()
                .map(|(i, &d)| MsTcnLayerConfig {
                    in_channels: if i == 0 { in_channels } else { FEATURE_DIM },
                    out_channels: FEATURE_DIM,
                    kernels: alloc::vec![3],
                    dilations: alloc::vec![d],
                })
                .collect(),
        ),
    }
}

impl SlipModelConfig {
    /// Reference configuration: both modalities, passthrough 512-d visual
    /// embeddings with a frozen backbone, MS-TCN stacks, last-step readout,
    /// 13-frame windows.
    pub fn fused_default() -> SlipModelConfig {
        Self::preset(Modality::Fused, 13, TemporalArch::MsTcn)
    }

    /// Default stacks for any modality / window length / temporal arch.
    pub fn preset(modality: Modality, seq_len: usize, temporal: TemporalArch) -> SlipModelConfig {
        let fusion_tcn = match modality {
            Modality::Fused => Some(fusion_stack(temporal, 2 * FEATURE_DIM)),
            _ => None,
        };
        SlipModelConfig {
            modality,
            seq_len,
            visual_mode: VisualMode::Passthrough { dim: DEFAULT_VISUAL_DIM },
            visual_frozen: true,
            temporal,
            readout: Readout::LastStep,
            tactile_tcn: modality_stack(temporal),
            visual_tcn: modality_stack(temporal),
            fusion_tcn,
        }
    }

    pub fn uses_tactile(&self) -> bool {
        matches!(self.modality, Modality::TactileOnly | Modality::Fused)
    }

    pub fn uses_visual(&self) -> bool {
        matches!(self.modality, Modality::VisualOnly | Modality::Fused)
    }

    /// Width of the feature vector entering the head.
    pub fn head_in(&self) -> usize {
        match self.modality {
            Modality::Fused => self.fusion_tcn.as_ref().map_or(0, |f| f.out_channels()),
            Modality::TactileOnly => self.tactile_tcn.out_channels(),
            Modality::VisualOnly => self.visual_tcn.out_channels(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seq_len == 0 {
            return Err(Error::InvalidConfig { detail: String::from("seq_len must be >= 1") });
        }
        self.visual_mode.validate()?;
        if self.uses_tactile() {
            self.tactile_tcn.validate()?;
            if self.tactile_tcn.in_channels() != FEATURE_DIM {
                return Err(Error::InvalidConfig {
                    detail: format!(
                        "tactile stack must take {FEATURE_DIM} channels, got {}",
                        self.tactile_tcn.in_channels()
                    ),
                });
            }
        }
        if self.uses_visual() {
            self.visual_tcn.validate()?;
            if self.visual_tcn.in_channels() != FEATURE_DIM {
                return Err(Error::InvalidConfig {
                    detail: format!(
                        "visual stack must take {FEATURE_DIM} channels, got {}",
                        self.visual_tcn.in_channels()
                    ),
                });
            }
        }
        match (self.modality, &self.fusion_tcn) {
            (Modality::Fused, None) => {
                return Err(Error::InvalidConfig {
                    detail: String::from("fused modality requires a fusion stack"),
                });
            }
            (Modality::Fused, Some(fusion)) => {
                fusion.validate()?;
                let expected = self.tactile_tcn.out_channels() + self.visual_tcn.out_channels();
                if fusion.in_channels() != expected {
                    return Err(Error::InvalidConfig {
                        detail: format!(
                            "fusion stack takes {} channels but the streams provide {expected}",
                            fusion.in_channels()
                        ),
                    });
                }
            }
            (_, Some(_)) => {
                return Err(Error::InvalidConfig {
                    detail: String::from(
                        "single-modality configs must not carry a fusion stack; the head reads the modality stack directly",
                    ),
                });
            }
            (_, None) => {}
        }
        if self.temporal == TemporalArch::Tcn {
            let mut stacks: Vec<(&str, &MsTcnConfig)> = Vec::new();
            if self.uses_tactile() {
                stacks.push(("tactile", &self.tactile_tcn));
            }
            if self.uses_visual() {
                stacks.push(("visual", &self.visual_tcn));
            }
            if let Some(fusion) = &self.fusion_tcn {
                stacks.push(("fusion", fusion));
            }
            for (name, stack) in stacks {
                if !stack.is_single_branch() {
                    return Err(Error::InvalidConfig {
                        detail: format!("temporal arch tcn requires single-branch {name} stack"),
                    });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SlipModelParams {
    pub tactile_encoder: Option<TactileEncoderParams>,
    pub visual_encoder: Option<VisualEncoderParams>,
    pub tactile_tcn: Option<MsTcnWeights>,
    pub visual_tcn: Option<MsTcnWeights>,
    pub fusion_tcn: Option<MsTcnWeights>,
    pub head_w: Tensor,
    pub head_b: Tensor,
}

/// One row of the parameter manifest: a stable name, the shape, and whether
/// the training loop may update it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub trainable: bool,
}

impl SlipModelParams {
    /// Seeded initialization; RNG consumption follows manifest order so a
    /// seed pins every weight.
    pub fn init<R: Rng + ?Sized>(cfg: &SlipModelConfig, rng: &mut R) -> Result<SlipModelParams> {
        cfg.validate()?;
        let tactile_encoder = if cfg.uses_tactile() {
            Some(TactileEncoderParams::init(rng)?)
        } else {
            None
        };
        let visual_encoder = if cfg.uses_visual() {
            Some(VisualEncoderParams::init(cfg.visual_mode, rng)?)
        } else {
            None
        };
        let tactile_tcn = if cfg.uses_tactile() {
            Some(MsTcnWeights::init(&cfg.tactile_tcn, rng)?)
        } else {
            None
        };
        let visual_tcn = if cfg.uses_visual() {
            Some(MsTcnWeights::init(&cfg.visual_tcn, rng)?)
        } else {
            None
        };
        let fusion_tcn = match &cfg.fusion_tcn {
            Some(fusion) => Some(MsTcnWeights::init(fusion, rng)?),
            None => None,
        };
        let feat = cfg.head_in();
        let head_w = Tensor::param(fan_in_uniform(rng, feat, 2 * feat), &[2, feat])?;
        let head_b = Tensor::param(zero_bias(2), &[2])?;
        Ok(SlipModelParams {
            tactile_encoder,
            visual_encoder,
            tactile_tcn,
            visual_tcn,
            fusion_tcn,
            head_w,
            head_b,
        })
    }

    /// All parameter handles in manifest order.
    pub fn named_tensors(&self) -> Vec<(String, Tensor)> {
        let mut out = Vec::new();
        if let Some(t) = &self.tactile_encoder {
            out.extend(t.named_tensors("tactile_encoder"));
        }
        if let Some(v) = &self.visual_encoder {
            out.extend(v.named_tensors("visual_encoder"));
        }
        if let Some(t) = &self.tactile_tcn {
            out.extend(t.named_tensors("tactile_tcn"));
        }
        if let Some(v) = &self.visual_tcn {
            out.extend(v.named_tensors("visual_tcn"));
        }
        if let Some(f) = &self.fusion_tcn {
            out.extend(f.named_tensors("fusion_tcn"));
        }
        out.push((String::from("head.weight"), self.head_w.clone()));
        out.push((String::from("head.bias"), self.head_b.clone()));
        out
    }

    /// Deep copy: fresh leaf tensors with the same values (graph state and
    /// gradients are not copied).
    pub fn snapshot(&self) -> Result<SlipModelParams> {
        let clone_tensor = |t: &Tensor| Tensor::param(t.to_vec(), t.shape());
        let tactile_encoder = match &self.tactile_encoder {
            Some(p) => Some(TactileEncoderParams {
                conv1_w: clone_tensor(&p.conv1_w)?,
                conv1_b: clone_tensor(&p.conv1_b)?,
                conv2_w: clone_tensor(&p.conv2_w)?,
                conv2_b: clone_tensor(&p.conv2_b)?,
                conv3_w: clone_tensor(&p.conv3_w)?,
                conv3_b: clone_tensor(&p.conv3_b)?,
                proj_w: clone_tensor(&p.proj_w)?,
                proj_b: clone_tensor(&p.proj_b)?,
            }),
            None => None,
        };
        let visual_encoder = match &self.visual_encoder {
            Some(VisualEncoderParams::Passthrough { proj_w, proj_b }) => {
                Some(VisualEncoderParams::Passthrough {
                    proj_w: clone_tensor(proj_w)?,
                    proj_b: clone_tensor(proj_b)?,
                })
            }
            Some(VisualEncoderParams::SmallCnn {
                conv1_w,
                conv1_b,
                conv2_w,
                conv2_b,
                conv3_w,
                conv3_b,
                proj_w,
                proj_b,
            }) => Some(VisualEncoderParams::SmallCnn {
                conv1_w: clone_tensor(conv1_w)?,
                conv1_b: clone_tensor(conv1_b)?,
                conv2_w: clone_tensor(conv2_w)?,
                conv2_b: clone_tensor(conv2_b)?,
                conv3_w: clone_tensor(conv3_w)?,
                conv3_b: clone_tensor(conv3_b)?,
                proj_w: clone_tensor(proj_w)?,
                proj_b: clone_tensor(proj_b)?,
            }),
            None => None,
        };
        let clone_stack = |w: &MsTcnWeights| -> Result<MsTcnWeights> {
            Ok(MsTcnWeights {
                layers: w
                    .layers
                    .iter()
                    .map(|l| {
                        Ok(crate::tcn::MsTcnLayerWeights {
                            branches: l
                                .branches
                                .iter()
                                .map(|b| {
                                    Ok(crate::tcn::BranchWeights {
                                        weight: clone_tensor(&b.weight)?,
                                        bias: clone_tensor(&b.bias)?,
                                    })
                                })
                                .collect::<Result<Vec<_>>>()?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?,
            })
        };
        Ok(SlipModelParams {
            tactile_encoder,
            visual_encoder,
            tactile_tcn: self.tactile_tcn.as_ref().map(&clone_stack).transpose()?,
            visual_tcn: self.visual_tcn.as_ref().map(&clone_stack).transpose()?,
            fusion_tcn: self.fusion_tcn.as_ref().map(&clone_stack).transpose()?,
            head_w: clone_tensor(&self.head_w)?,
            head_b: clone_tensor(&self.head_b)?,
        })
    }
}

/// Enumerates every parameter the config implies, in the order `init`
/// consumes randomness and checkpoints serialize: tactile encoder, visual
/// encoder, tactile stack, visual stack, fusion stack, head. Names are
/// unique; `trainable` is false only for a frozen visual backbone.
pub fn parameter_manifest(cfg: &SlipModelConfig) -> Result<Vec<ManifestEntry>> {
    cfg.validate()?;
    let mut out = Vec::new();
    if cfg.uses_tactile() {
        for (stage, c_out, c_in, k) in [
            ("conv1", 8usize, 3usize, 3usize),
            ("conv2", 16, 8, 3),
            ("conv3", 32, 16, 1),
        ] {
            out.push(ManifestEntry {
                name: format!("tactile_encoder.{stage}.weight"),
                shape: alloc::vec![c_out, c_in, k, k],
                trainable: true,
            });
            out.push(ManifestEntry {
                name: format!("tactile_encoder.{stage}.bias"),
                shape: alloc::vec![c_out],
                trainable: true,
            });
        }
        out.push(ManifestEntry {
            name: String::from("tactile_encoder.proj.weight"),
            shape: alloc::vec![FEATURE_DIM, 32],
            trainable: true,
        });
        out.push(ManifestEntry {
            name: String::from("tactile_encoder.proj.bias"),
            shape: alloc::vec![FEATURE_DIM],
            trainable: true,
        });
    }
    if cfg.uses_visual() {
        match cfg.visual_mode {
            VisualMode::Passthrough { dim } => {
                out.push(ManifestEntry {
                    name: String::from("visual_encoder.proj.weight"),
                    shape: alloc::vec![FEATURE_DIM, dim],
                    trainable: true,
                });
                out.push(ManifestEntry {
                    name: String::from("visual_encoder.proj.bias"),
                    shape: alloc::vec![FEATURE_DIM],
                    trainable: true,
                });
            }
            VisualMode::SmallCnn => {
                let backbone_trainable = !cfg.visual_frozen;
                for (stage, c_out, c_in) in
                    [("conv1", 8usize, 3usize), ("conv2", 16, 8), ("conv3", 32, 16)]
                {
                    out.push(ManifestEntry {
                        name: format!("visual_encoder.{stage}.weight"),
                        shape: alloc::vec![c_out, c_in, 3, 3],
                        trainable: backbone_trainable,
                    });
                    out.push(ManifestEntry {
                        name: format!("visual_encoder.{stage}.bias"),
                        shape: alloc::vec![c_out],
                        trainable: backbone_trainable,
                    });
                }
                out.push(ManifestEntry {
                    name: String::from("visual_encoder.proj.weight"),
                    shape: alloc::vec![FEATURE_DIM, 512],
                    trainable: true,
                });
                out.push(ManifestEntry {
                    name: String::from("visual_encoder.proj.bias"),
                    shape: alloc::vec![FEATURE_DIM],
                    trainable: true,
                });
            }
        }
    }
    let push_stack = |out: &mut Vec<ManifestEntry>, prefix: &str, stack: &MsTcnConfig| {
        for (i, layer) in stack.layers.iter().enumerate() {
            let widths = layer.branch_channels();
            for (j, &c_j) in widths.iter().enumerate() {
                out.push(ManifestEntry {
                    name: format!("{prefix}.layer{i}.branch{j}.weight"),
                    shape: alloc::vec![c_j, layer.in_channels, layer.kernels[j]],
                    trainable: true,
                });
                out.push(ManifestEntry {
                    name: format!("{prefix}.layer{i}.branch{j}.bias"),
                    shape: alloc::vec![c_j],
                    trainable: true,
                });
            }
        }
    };
    if cfg.uses_tactile() {
        push_stack(&mut out, "tactile_tcn", &cfg.tactile_tcn);
    }
    if cfg.uses_visual() {
        push_stack(&mut out, "visual_tcn", &cfg.visual_tcn);
    }
    if let Some(fusion) = &cfg.fusion_tcn {
        push_stack(&mut out, "fusion_tcn", fusion);
    }
    let feat = cfg.head_in();
    out.push(ManifestEntry {
        name: String::from("head.weight"),
        shape: alloc::vec![2, feat],
        trainable: true,
    });
    out.push(ManifestEntry { name: String::from("head.bias"), shape: alloc::vec![2], trainable: true });
    Ok(out)
}

/// One window of model input. Streams the config does not use may be empty
/// and are never read.
#[derive(Debug, Clone, Default)]
pub struct WindowInput {
    /// T tactile frames, each [3, 4, 4].
    pub tactile: Vec<Tensor>,
    /// T visual frames matching the visual mode.
    pub visual: Vec<VisualFrame>,
}

fn temporal(
    arch: TemporalArch,
    x: &Tensor,
    cfg: &MsTcnConfig,
    weights: &MsTcnWeights,
) -> Result<Tensor> {
    match arch {
        TemporalArch::MsTcn => mstcn_forward(x, cfg, weights),
        TemporalArch::Tcn => tcn_forward(x, cfg, weights),
    }
}

/// Intermediate activations of one window, for tests and diagnostics.
#[derive(Debug)]
pub struct ForwardTrace {
    /// Encoder output [64, T] per used modality.
    pub tactile_frames: Option<Tensor>,
    pub visual_frames: Option<Tensor>,
    /// Modality temporal stack output [64, T].
    pub tactile_temporal: Option<Tensor>,
    pub visual_temporal: Option<Tensor>,
    /// Concatenated stream [128, T]; fused mode only.
    pub fused: Option<Tensor>,
    /// Fusion stack output [64, T]; fused mode only.
    pub fusion_out: Option<Tensor>,
    /// Readout feature vector entering the head.
    pub features: Tensor,
    /// Head output [2].
    pub logits: Tensor,
}

impl ForwardTrace {
    /// Every [C, T] stage, in pipeline order, with names. Used by the
    /// causality suite to compare all intermediate columns.
    pub fn temporal_stages(&self) -> Vec<(&'static str, &Tensor)> {
        let mut out = Vec::new();
        if let Some(t) = &self.tactile_frames {
            out.push(("tactile_frames", t));
        }
        if let Some(t) = &self.tactile_temporal {
            out.push(("tactile_temporal", t));
        }
        if let Some(v) = &self.visual_frames {
            out.push(("visual_frames", v));
        }
        if let Some(v) = &self.visual_temporal {
            out.push(("visual_temporal", v));
        }
        if let Some(f) = &self.fused {
            out.push(("fused", f));
        }
        if let Some(f) = &self.fusion_out {
            out.push(("fusion_out", f));
        }
        out
    }
}

/// Runs one window and keeps every stage. The batch entry point discards the
/// intermediates; tests use this to check causality and fusion wiring.
pub fn forward_traced(
    cfg: &SlipModelConfig,
    params: &SlipModelParams,
    window: &WindowInput,
) -> Result<ForwardTrace> {
    cfg.validate()?;
    let mut tactile_frames = None;
    let mut visual_frames = None;
    let mut tactile_temporal = None;
    let mut visual_temporal = None;
    let tactile_stream = if cfg.uses_tactile() {
        if window.tactile.len() != cfg.seq_len {
            return Err(Error::MissingModality {
                modality: "tactile",
                detail: format!(
                    "window has {} tactile frames, config needs {}",
                    window.tactile.len(),
                    cfg.seq_len
                ),
            });
        }
        let enc = params.tactile_encoder.as_ref().ok_or(Error::MissingModality {
            modality: "tactile",
            detail: String::from("parameter set has no tactile encoder"),
        })?;
        let stack = params.tactile_tcn.as_ref().ok_or(Error::MissingModality {
            modality: "tactile",
            detail: String::from("parameter set has no tactile temporal stack"),
        })?;
        let frames = encode_tactile_sequence(&window.tactile, enc)?;
        let out = temporal(cfg.temporal, &frames, &cfg.tactile_tcn, stack)?;
        tactile_frames = Some(frames);
        tactile_temporal = Some(out.clone());
        Some(out)
    } else {
        None
    };
    let visual_stream = if cfg.uses_visual() {
        if window.visual.len() != cfg.seq_len {
            return Err(Error::MissingModality {
                modality: "visual",
                detail: format!(
                    "window has {} visual frames, config needs {}",
                    window.visual.len(),
                    cfg.seq_len
                ),
            });
        }
        let enc = params.visual_encoder.as_ref().ok_or(Error::MissingModality {
            modality: "visual",
            detail: String::from("parameter set has no visual encoder"),
        })?;
        let stack = params.visual_tcn.as_ref().ok_or(Error::MissingModality {
            modality: "visual",
            detail: String::from("parameter set has no visual temporal stack"),
        })?;
        let frames = encode_visual_sequence(&window.visual, enc)?;
        let out = temporal(cfg.temporal, &frames, &cfg.visual_tcn, stack)?;
        visual_frames = Some(frames);
        visual_temporal = Some(out.clone());
        Some(out)
    } else {
        None
    };
    let mut fused = None;
    let mut fusion_out = None;
    let final_map = match (tactile_stream, visual_stream) {
        (Some(t), Some(v)) => {
            let cat = t.concat_channels(&v)?;
            let fusion_cfg = cfg.fusion_tcn.as_ref().expect("validated fused config");
            let fusion_w = params.fusion_tcn.as_ref().ok_or(Error::MissingModality {
                modality: "fusion",
                detail: String::from("parameter set has no fusion stack"),
            })?;
            let out = temporal(cfg.temporal, &cat, fusion_cfg, fusion_w)?;
            fused = Some(cat);
            fusion_out = Some(out.clone());
            out
        }
        (Some(t), None) => t,
        (None, Some(v)) => v,
        (None, None) => unreachable!("config always uses at least one modality"),
    };
    let features = match cfg.readout {
        Readout::LastStep => final_map.select_column(cfg.seq_len - 1)?,
        Readout::MeanOverTime => final_map.mean_columns()?,
    };
    let logits = features
        .reshape(&[1, features.numel()])?
        .linear(&params.head_w, &params.head_b)?
        .reshape(&[2])?;
    Ok(ForwardTrace {
        tactile_frames,
        visual_frames,
        tactile_temporal,
        visual_temporal,
        fused,
        fusion_out,
        features,
        logits,
    })
}

/// Batch forward: [N, 2] logits for N windows.
pub fn forward(
    cfg: &SlipModelConfig,
    params: &SlipModelParams,
    batch: &[WindowInput],
) -> Result<Tensor> {
    if batch.is_empty() {
        return Err(Error::ShapeMismatch {
            op: "forward",
            detail: String::from("empty batch"),
        });
    }
    let features = batch
        .iter()
        .enumerate()
        .map(|(i, w)| {
            forward_traced(cfg, params, w).map(|t| t.features).map_err(|e| {
                Error::ShapeMismatch { op: "forward", detail: format!("window {i}: {e}") }
            })
        })
        .collect::<Result<Vec<_>>>()?;
    stack_rows(&features)?.linear(&params.head_w, &params.head_b)
}

/// A single-window classification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub label: StateLabel,
    /// Softmax probability of the predicted class; always in [0.5, 1) for
    /// two classes.
    pub confidence: f64,
    /// Raw head outputs [slip, stable].
    pub logits: [f64; 2],
}

/// Classifies one window. Argmax over the two logits; an exact tie resolves
/// to the lower class index (slip), biasing ambiguity toward the safe call.
pub fn predict(
    cfg: &SlipModelConfig,
    params: &SlipModelParams,
    window: &WindowInput,
) -> Result<Prediction> {
    let trace = forward_traced(cfg, params, window)?;
    let logits = trace.logits.to_vec();
    let (slip, stable) = (logits[0], logits[1]);
    let label = if stable > slip { StateLabel::Stable } else { StateLabel::Slip };
    let max = if slip > stable { slip } else { stable };
    let e0 = math::exp(slip - max);
    let e1 = math::exp(stable - max);
    let denom = e0 + e1;
    let confidence = match label {
        StateLabel::Slip => e0 / denom,
        StateLabel::Stable => e1 / denom,
    };
    Ok(Prediction { label, confidence, logits: [slip, stable] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoders::TACTILE_FRAME_SHAPE;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn rng(seed: u64) -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(seed)
    }

    fn zero_window(cfg: &SlipModelConfig) -> WindowInput {
        let tactile = if cfg.uses_tactile() {
            (0..cfg.seq_len).map(|_| Tensor::zeros(&TACTILE_FRAME_SHAPE)).collect()
        } else {
            Vec::new()
        };
        let visual = if cfg.uses_visual() {
            let dim = match cfg.visual_mode {
                VisualMode::Passthrough { dim } => dim,
                VisualMode::SmallCnn => 0,
            };
            (0..cfg.seq_len)
                .map(|_| match cfg.visual_mode {
                    VisualMode::Passthrough { .. } => VisualFrame::Embedding(Tensor::zeros(&[dim])),
                    VisualMode::SmallCnn => {
                        VisualFrame::Image(Tensor::zeros(&crate::encoders::VISUAL_IMAGE_SHAPE))
                    }
                })
                .collect()
        } else {
            Vec::new()
        };
        WindowInput { tactile, visual }
    }

    /// Zeroes every weight, then plants the given head bias so logits are
    /// exactly `bias` for any zero window.
    fn pin_logits(params: &SlipModelParams, bias: [f64; 2]) {
        for (_, t) in params.named_tensors() {
            t.set_data(vec![0.0; t.numel()]).unwrap();
        }
        params.head_b.set_data(bias.to_vec()).unwrap();
    }

    #[test]
    fn default_configs_validate_for_every_modality_and_arch() {
        for modality in [Modality::TactileOnly, Modality::VisualOnly, Modality::Fused] {
            for arch in [TemporalArch::MsTcn, TemporalArch::Tcn] {
                let cfg = SlipModelConfig::preset(modality, 13, arch);
                cfg.validate().unwrap();
                assert_eq!(cfg.head_in(), 64);
            }
        }
    }

    #[test]
    fn fused_config_requires_matching_fusion_width() {
        let mut cfg = SlipModelConfig::fused_default();
        cfg.fusion_tcn = Some(MsTcnConfig::new(alloc::vec![MsTcnLayerConfig::uniform(
            64, 64, 3, 3
        )]));
        assert!(cfg.validate().is_err(), "fusion must take 128 channels");
        let mut cfg = SlipModelConfig::fused_default();
        cfg.fusion_tcn = None;
        assert!(cfg.validate().is_err(), "fused needs a fusion stack");
    }

    #[test]
    fn single_modality_must_not_carry_fusion_stack() {
        let mut cfg = SlipModelConfig::preset(Modality::TactileOnly, 13, TemporalArch::MsTcn);
        assert!(cfg.fusion_tcn.is_none());
        cfg.validate().unwrap();
        cfg.fusion_tcn = Some(MsTcnConfig::new(alloc::vec![MsTcnLayerConfig::uniform(
            64, 64, 3, 3
        )]));
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn tcn_arch_rejects_multi_branch_stacks() {
        let mut cfg = SlipModelConfig::preset(Modality::Fused, 13, TemporalArch::Tcn);
        cfg.validate().unwrap();
        cfg.tactile_tcn = MsTcnConfig::new(alloc::vec![
            MsTcnLayerConfig::uniform(64, 64, 2, 5),
            MsTcnLayerConfig::uniform(64, 64, 2, 5),
        ]);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn manifest_names_are_unique_and_match_init() {
        for modality in [Modality::TactileOnly, Modality::VisualOnly, Modality::Fused] {
            let cfg = SlipModelConfig::preset(modality, 13, TemporalArch::MsTcn);
            let manifest = parameter_manifest(&cfg).unwrap();
            let params = SlipModelParams::init(&cfg, &mut rng(11)).unwrap();
            let named = params.named_tensors();
            assert_eq!(manifest.len(), named.len(), "{modality:?}");
            let mut seen = alloc::collections::BTreeSet::new();
            for (entry, (name, tensor)) in manifest.iter().zip(&named) {
                assert_eq!(&entry.name, name);
                assert_eq!(entry.shape, tensor.shape().to_vec(), "{name}");
                assert!(seen.insert(entry.name.clone()), "duplicate {name}");
            }
        }
    }

    #[test]
    fn manifest_scopes_follow_modality() {
        let tactile = parameter_manifest(&SlipModelConfig::preset(
            Modality::TactileOnly,
            13,
            TemporalArch::MsTcn,
        ))
        .unwrap();
        assert!(tactile.iter().all(|e| !e.name.starts_with("visual")));
        assert!(tactile.iter().all(|e| !e.name.starts_with("fusion")));
        assert!(tactile.iter().any(|e| e.name.starts_with("tactile_encoder")));
        assert!(tactile.iter().any(|e| e.name.starts_with("tactile_tcn")));
        let visual = parameter_manifest(&SlipModelConfig::preset(
            Modality::VisualOnly,
            13,
            TemporalArch::MsTcn,
        ))
        .unwrap();
        assert!(visual.iter().all(|e| !e.name.starts_with("tactile")));
        let fused = parameter_manifest(&SlipModelConfig::fused_default()).unwrap();
        assert!(fused.iter().any(|e| e.name.starts_with("fusion_tcn")));
        // head is always last
        assert_eq!(fused.last().unwrap().name, "head.bias");
        assert_eq!(fused.last().unwrap().shape, alloc::vec![2]);
    }

    #[test]
    fn passthrough_manifest_is_fully_trainable() {
        let cfg = SlipModelConfig::fused_default();
        let manifest = parameter_manifest(&cfg).unwrap();
        assert!(manifest.iter().all(|e| e.trainable));
    }

    #[test]
    fn frozen_small_cnn_marks_backbone_non_trainable() {
        let mut cfg = SlipModelConfig::preset(Modality::VisualOnly, 13, TemporalArch::MsTcn);
        cfg.visual_mode = VisualMode::SmallCnn;
        cfg.visual_frozen = true;
        let manifest = parameter_manifest(&cfg).unwrap();
        let frozen: Vec<&str> = manifest
            .iter()
            .filter(|e| !e.trainable)
            .map(|e| e.name.as_str())
            .collect();
        assert_eq!(frozen.len(), 6);
        assert!(frozen.iter().all(|n| n.starts_with("visual_encoder.conv")));
        // projection stays trainable even when the backbone is frozen
        assert!(manifest
            .iter()
            .any(|e| e.name == "visual_encoder.proj.weight" && e.trainable));
        cfg.visual_frozen = false;
        assert!(parameter_manifest(&cfg).unwrap().iter().all(|e| e.trainable));
    }

    #[test]
    fn init_is_deterministic_per_seed() {
        let cfg = SlipModelConfig::fused_default();
        let flat = |p: &SlipModelParams| -> Vec<f64> {
            p.named_tensors().iter().flat_map(|(_, t)| t.to_vec()).collect()
        };
        let a = SlipModelParams::init(&cfg, &mut rng(100)).unwrap();
        let b = SlipModelParams::init(&cfg, &mut rng(100)).unwrap();
        let c = SlipModelParams::init(&cfg, &mut rng(101)).unwrap();
        assert_eq!(flat(&a), flat(&b));
        assert_ne!(flat(&a), flat(&c));
    }

    #[test]
    fn snapshot_is_a_deep_copy() {
        let cfg = SlipModelConfig::preset(Modality::TactileOnly, 5, TemporalArch::MsTcn);
        let params = SlipModelParams::init(&cfg, &mut rng(8)).unwrap();
        let snap = params.snapshot().unwrap();
        let live = params.named_tensors();
        let copy = snap.named_tensors();
        for ((n1, t1), (n2, t2)) in live.iter().zip(&copy) {
            assert_eq!(n1, n2);
            assert_eq!(t1.to_vec(), t2.to_vec());
        }
        // mutating the original must not leak into the snapshot
        params.head_b.set_data(alloc::vec![9.0, 9.0]).unwrap();
        assert_ne!(snap.head_b.to_vec(), alloc::vec![9.0, 9.0]);
    }

    #[test]
    fn forward_produces_batch_logits() {
        let cfg = SlipModelConfig::preset(Modality::Fused, 4, TemporalArch::MsTcn);
        let params = SlipModelParams::init(&cfg, &mut rng(21)).unwrap();
        let batch: Vec<WindowInput> = (0..3).map(|_| zero_window(&cfg)).collect();
        let logits = forward(&cfg, &params, &batch).unwrap();
        assert_eq!(logits.shape(), &[3, 2]);
        assert!(forward(&cfg, &params, &[]).is_err(), "empty batch");
    }

    #[test]
    fn forward_checks_frame_counts() {
        let cfg = SlipModelConfig::preset(Modality::TactileOnly, 4, TemporalArch::MsTcn);
        let params = SlipModelParams::init(&cfg, &mut rng(2)).unwrap();
        let mut window = zero_window(&cfg);
        window.tactile.pop();
        let err = forward_traced(&cfg, &params, &window).unwrap_err();
        match err {
            Error::MissingModality { modality, .. } => assert_eq!(modality, "tactile"),
            other => panic!("expected MissingModality, got {other:?}"),
        }
    }

    #[test]
    fn trace_exposes_fusion_stages_only_when_fused() {
        let cfg = SlipModelConfig::preset(Modality::Fused, 4, TemporalArch::MsTcn);
        let params = SlipModelParams::init(&cfg, &mut rng(3)).unwrap();
        let trace = forward_traced(&cfg, &params, &zero_window(&cfg)).unwrap();
        assert!(trace.fused.is_some());
        assert!(trace.fusion_out.is_some());
        assert_eq!(trace.fused.as_ref().unwrap().shape(), &[128, 4]);
        assert_eq!(trace.fusion_out.as_ref().unwrap().shape(), &[64, 4]);
        assert_eq!(trace.features.shape(), &[64]);
        assert_eq!(trace.logits.shape(), &[2]);
        assert_eq!(trace.temporal_stages().len(), 6);

        let cfg = SlipModelConfig::preset(Modality::TactileOnly, 4, TemporalArch::MsTcn);
        let params = SlipModelParams::init(&cfg, &mut rng(3)).unwrap();
        let trace = forward_traced(&cfg, &params, &zero_window(&cfg)).unwrap();
        assert!(trace.fused.is_none());
        assert!(trace.fusion_out.is_none());
        assert!(trace.visual_frames.is_none());
        assert_eq!(trace.temporal_stages().len(), 2);
    }

    #[test]
    fn predict_matches_softmax_oracle() {
        let cfg = SlipModelConfig::preset(Modality::TactileOnly, 2, TemporalArch::MsTcn);
        let params = SlipModelParams::init(&cfg, &mut rng(1)).unwrap();
        pin_logits(&params, [2.0, -1.0]);
        let pred = predict(&cfg, &params, &zero_window(&cfg)).unwrap();
        assert_eq!(pred.label, StateLabel::Slip);
        assert_eq!(pred.logits, [2.0, -1.0]);
        // sigma(3) = 1 / (1 + e^-3)
        assert!((pred.confidence - 0.9525741268224331).abs() < 1e-12);

        pin_logits(&params, [-1.0, 2.0]);
        let pred = predict(&cfg, &params, &zero_window(&cfg)).unwrap();
        assert_eq!(pred.label, StateLabel::Stable);
        assert!((pred.confidence - 0.9525741268224331).abs() < 1e-12);
    }

    #[test]
    fn predict_resolves_exact_tie_to_slip() {
        let cfg = SlipModelConfig::preset(Modality::TactileOnly, 2, TemporalArch::MsTcn);
        let params = SlipModelParams::init(&cfg, &mut rng(1)).unwrap();
        pin_logits(&params, [0.7, 0.7]);
        let pred = predict(&cfg, &params, &zero_window(&cfg)).unwrap();
        assert_eq!(pred.label, StateLabel::Slip);
        assert!((pred.confidence - 0.5).abs() < 1e-12);
    }

    #[test]
    fn readout_switch_changes_feature_source() {
        let mut cfg = SlipModelConfig::preset(Modality::TactileOnly, 3, TemporalArch::MsTcn);
        let params = SlipModelParams::init(&cfg, &mut rng(14)).unwrap();
        // non-zero input so time steps differ
        let mut window = zero_window(&cfg);
        window.tactile[0] = Tensor::new(alloc::vec![0.5; 48], &TACTILE_FRAME_SHAPE).unwrap();
        let last = forward_traced(&cfg, &params, &window).unwrap();
        cfg.readout = Readout::MeanOverTime;
        let mean = forward_traced(&cfg, &params, &window).unwrap();
        let map = last.tactile_temporal.as_ref().unwrap();
        assert_eq!(last.features.to_vec(), map.select_column(2).unwrap().to_vec());
        assert_eq!(mean.features.to_vec(), map.mean_columns().unwrap().to_vec());
        assert_ne!(last.features.to_vec(), mean.features.to_vec());
    }

    #[test]
    fn state_label_round_trip_and_order() {
        assert_eq!(StateLabel::Slip.index(), 0);
        assert_eq!(StateLabel::Stable.index(), 1);
        assert_eq!(StateLabel::from_index(0).unwrap(), StateLabel::Slip);
        assert_eq!(StateLabel::from_index(1).unwrap(), StateLabel::Stable);
        assert!(StateLabel::from_index(2).is_err());
        assert_eq!(StateLabel::Slip.name(), "slip");
        assert_eq!(StateLabel::Stable.name(), "stable");
    }

    #[cfg(feature = "serde")]
    #[test]
    fn config_survives_json_round_trip() {
        let cfg = SlipModelConfig::fused_default();
        let json = serde_json::to_string(&cfg).unwrap();
        let back: SlipModelConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(cfg, back);
        let single = SlipModelConfig::preset(Modality::TactileOnly, 8, TemporalArch::Tcn);
        let json = serde_json::to_string(&single).unwrap();
        let back: SlipModelConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(single, back);
    }
}
