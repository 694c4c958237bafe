//! Per-frame encoders that map raw frames to 64-dimensional features.
//!
//! Tactile: a 4x4x3 force image goes through a small conv pyramid
//! (3x3/8 -> pool -> 3x3/16 -> pool -> 1x1/32) and a 32 -> 64 projection.
//! Visual: either a precomputed backbone embedding projected E -> 64
//! (passthrough mode, matching a frozen external feature extractor), or a
//! compact conv pyramid over a 3x32x32 image ending in a 512 -> 64
//! projection.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::init::{fan_in_uniform, zero_bias};
use crate::ops::stack_columns;
use crate::tensor::Tensor;

pub const FEATURE_DIM: usize = 64;
/// Tactile frames are 3-channel (x/y/z force) 4x4 taxel images.
pub const TACTILE_FRAME_SHAPE: [usize; 3] = [3, 4, 4];
/// Image-mode visual frames are 3-channel 32x32.
pub const VISUAL_IMAGE_SHAPE: [usize; 3] = [3, 32, 32];
/// Flattened size after the small-CNN pyramid (32 channels at 4x4).
const SMALL_CNN_FLAT: usize = 512;

/// How visual frames arrive and how they are encoded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum VisualMode {
    /// Frames are `dim`-dimensional embeddings from an external backbone;
    /// only a dim -> 64 projection is learned.
    Passthrough { dim: usize },
    /// Frames are 3x32x32 images encoded by a small trainable conv pyramid.
    SmallCnn,
}

impl VisualMode {
    pub fn validate(&self) -> Result<()> {
        if let VisualMode::Passthrough { dim: 0 } = self {
            return Err(Error::InvalidConfig {
                detail: String::from("passthrough visual mode needs embedding dim >= 1"),
            });
        }
        Ok(())
    }
}

/// One visual frame, matching the encoder mode in use.
#[derive(Debug, Clone)]
pub enum VisualFrame {
    /// [E] embedding vector.
    Embedding(Tensor),
    /// [3, 32, 32] image.
    Image(Tensor),
}

#[derive(Debug, Clone)]
pub struct TactileEncoderParams {
    pub conv1_w: Tensor,
    pub conv1_b: Tensor,
    pub conv2_w: Tensor,
    pub conv2_b: Tensor,
    pub conv3_w: Tensor,
    pub conv3_b: Tensor,
    pub proj_w: Tensor,
    pub proj_b: Tensor,
}

impl TactileEncoderParams {
    pub fn init<R: Rng + ?Sized>(rng: &mut R) -> Result<TactileEncoderParams> {
        Ok(TactileEncoderParams {
            conv1_w: Tensor::param(fan_in_uniform(rng, 3 * 9, 8 * 3 * 9), &[8, 3, 3, 3])?,
            conv1_b: Tensor::param(zero_bias(8), &[8])?,
            conv2_w: Tensor::param(fan_in_uniform(rng, 8 * 9, 16 * 8 * 9), &[16, 8, 3, 3])?,
            conv2_b: Tensor::param(zero_bias(16), &[16])?,
            conv3_w: Tensor::param(fan_in_uniform(rng, 16, 32 * 16), &[32, 16, 1, 1])?,
            conv3_b: Tensor::param(zero_bias(32), &[32])?,
            proj_w: Tensor::param(fan_in_uniform(rng, 32, FEATURE_DIM * 32), &[FEATURE_DIM, 32])?,
            proj_b: Tensor::param(zero_bias(FEATURE_DIM), &[FEATURE_DIM])?,
        })
    }

    pub fn named_tensors(&self, prefix: &str) -> Vec<(String, Tensor)> {
        alloc::vec![
            (format!("{prefix}.conv1.weight"), self.conv1_w.clone()),
            (format!("{prefix}.conv1.bias"), self.conv1_b.clone()),
            (format!("{prefix}.conv2.weight"), self.conv2_w.clone()),
            (format!("{prefix}.conv2.bias"), self.conv2_b.clone()),
            (format!("{prefix}.conv3.weight"), self.conv3_w.clone()),
            (format!("{prefix}.conv3.bias"), self.conv3_b.clone()),
            (format!("{prefix}.proj.weight"), self.proj_w.clone()),
            (format!("{prefix}.proj.bias"), self.proj_b.clone()),
        ]
    }
}

/// Encodes one [3, 4, 4] tactile frame to a [64] feature vector.
///
/// Pipeline: conv 3x3 pad 1 -> relu -> maxpool 2x2 (4x4 -> 2x2), conv 3x3
/// pad 1 -> relu -> maxpool 2x2 (2x2 -> 1x1), conv 1x1 -> relu, flatten 32,
/// linear 32 -> 64.
pub fn tactile_encode(frame: &Tensor, params: &TactileEncoderParams) -> Result<Tensor> {
    if frame.shape() != TACTILE_FRAME_SHAPE {
        return Err(Error::ShapeMismatch {
            op: "tactile_encode",
            detail: format!(
                "input frame must be {TACTILE_FRAME_SHAPE:?}, got {:?}",
                frame.shape()
            ),
        });
    }
    let x = frame
        .conv2d(&params.conv1_w, &params.conv1_b, (1, 1), (1, 1))?
        .relu()
        .maxpool2d((2, 2), (2, 2))?;
    let x = x
        .conv2d(&params.conv2_w, &params.conv2_b, (1, 1), (1, 1))?
        .relu()
        .maxpool2d((2, 2), (2, 2))?;
    let x = x.conv2d(&params.conv3_w, &params.conv3_b, (1, 1), (0, 0))?.relu();
    let flat = x.reshape(&[1, 32])?;
    flat.linear(&params.proj_w, &params.proj_b)?.reshape(&[FEATURE_DIM])
}

#[derive(Debug, Clone)]
pub enum VisualEncoderParams {
    Passthrough {
        proj_w: Tensor,
        proj_b: Tensor,
    },
    SmallCnn {
        conv1_w: Tensor,
        conv1_b: Tensor,
        conv2_w: Tensor,
        conv2_b: Tensor,
        conv3_w: Tensor,
        conv3_b: Tensor,
        proj_w: Tensor,
        proj_b: Tensor,
    },
}

impl VisualEncoderParams {
    pub fn init<R: Rng + ?Sized>(mode: VisualMode, rng: &mut R) -> Result<VisualEncoderParams> {
        mode.validate()?;
        match mode {
            VisualMode::Passthrough { dim } => Ok(VisualEncoderParams::Passthrough {
                proj_w: Tensor::param(fan_in_uniform(rng, dim, FEATURE_DIM * dim), &[FEATURE_DIM, dim])?,
                proj_b: Tensor::param(zero_bias(FEATURE_DIM), &[FEATURE_DIM])?,
            }),
            VisualMode::SmallCnn => Ok(VisualEncoderParams::SmallCnn {
                conv1_w: Tensor::param(fan_in_uniform(rng, 3 * 9, 8 * 3 * 9), &[8, 3, 3, 3])?,
                conv1_b: Tensor::param(zero_bias(8), &[8])?,
                conv2_w: Tensor::param(fan_in_uniform(rng, 8 * 9, 16 * 8 * 9), &[16, 8, 3, 3])?,
                conv2_b: Tensor::param(zero_bias(16), &[16])?,
                conv3_w: Tensor::param(fan_in_uniform(rng, 16 * 9, 32 * 16 * 9), &[32, 16, 3, 3])?,
                conv3_b: Tensor::param(zero_bias(32), &[32])?,
                proj_w: Tensor::param(
                    fan_in_uniform(rng, SMALL_CNN_FLAT, FEATURE_DIM * SMALL_CNN_FLAT),
                    &[FEATURE_DIM, SMALL_CNN_FLAT],
                )?,
                proj_b: Tensor::param(zero_bias(FEATURE_DIM), &[FEATURE_DIM])?,
            }),
        }
    }

    /// Parameter handles with names; backbone entries come before the
    /// projection so freeze flags can address them as a block.
    pub fn named_tensors(&self, prefix: &str) -> Vec<(String, Tensor)> {
        match self {
            VisualEncoderParams::Passthrough { proj_w, proj_b } => alloc::vec![
                (format!("{prefix}.proj.weight"), proj_w.clone()),
                (format!("{prefix}.proj.bias"), proj_b.clone()),
            ],
            VisualEncoderParams::SmallCnn {
                conv1_w,
                conv1_b,
                conv2_w,
                conv2_b,
                conv3_w,
                conv3_b,
                proj_w,
                proj_b,
            } => alloc::vec![
                (format!("{prefix}.conv1.weight"), conv1_w.clone()),
                (format!("{prefix}.conv1.bias"), conv1_b.clone()),
                (format!("{prefix}.conv2.weight"), conv2_w.clone()),
                (format!("{prefix}.conv2.bias"), conv2_b.clone()),
                (format!("{prefix}.conv3.weight"), conv3_w.clone()),
                (format!("{prefix}.conv3.bias"), conv3_b.clone()),
                (format!("{prefix}.proj.weight"), proj_w.clone()),
                (format!("{prefix}.proj.bias"), proj_b.clone()),
            ],
        }
    }

    /// Names of the frozen-backbone block (empty for passthrough, whose only
    /// parameters are the always-trainable projection).
    pub fn backbone_names(&self, prefix: &str) -> Vec<String> {
        match self {
            VisualEncoderParams::Passthrough { .. } => Vec::new(),
            VisualEncoderParams::SmallCnn { .. } => alloc::vec![
                format!("{prefix}.conv1.weight"),
                format!("{prefix}.conv1.bias"),
                format!("{prefix}.conv2.weight"),
                format!("{prefix}.conv2.bias"),
                format!("{prefix}.conv3.weight"),
                format!("{prefix}.conv3.bias"),
            ],
        }
    }
}

/// Encodes one visual frame to a [64] feature vector. The frame kind must
/// match the encoder mode.
pub fn visual_encode(frame: &VisualFrame, params: &VisualEncoderParams) -> Result<Tensor> {
    match (frame, params) {
        (VisualFrame::Embedding(e), VisualEncoderParams::Passthrough { proj_w, proj_b }) => {
            if e.shape().len() != 1 || e.shape()[0] != proj_w.shape()[1] {
                return Err(Error::ShapeMismatch {
                    op: "visual_encode",
                    detail: format!(
                        "embedding {:?} does not match projection input {}",
                        e.shape(),
                        proj_w.shape()[1]
                    ),
                });
            }
            let row = e.reshape(&[1, e.numel()])?;
            row.linear(proj_w, proj_b)?.reshape(&[FEATURE_DIM])
        }
        (
            VisualFrame::Image(img),
            VisualEncoderParams::SmallCnn {
                conv1_w,
                conv1_b,
                conv2_w,
                conv2_b,
                conv3_w,
                conv3_b,
                proj_w,
                proj_b,
            },
        ) => {
            if img.shape() != VISUAL_IMAGE_SHAPE {
                return Err(Error::ShapeMismatch {
                    op: "visual_encode",
                    detail: format!(
                        "image frame must be {VISUAL_IMAGE_SHAPE:?}, got {:?}",
                        img.shape()
                    ),
                });
            }
            let x = img
                .conv2d(conv1_w, conv1_b, (1, 1), (1, 1))?
                .relu()
                .maxpool2d((2, 2), (2, 2))?;
            let x = x
                .conv2d(conv2_w, conv2_b, (1, 1), (1, 1))?
                .relu()
                .maxpool2d((2, 2), (2, 2))?;
            let x = x
                .conv2d(conv3_w, conv3_b, (1, 1), (1, 1))?
                .relu()
                .maxpool2d((2, 2), (2, 2))?;
            let flat = x.reshape(&[1, SMALL_CNN_FLAT])?;
            flat.linear(proj_w, proj_b)?.reshape(&[FEATURE_DIM])
        }
        (VisualFrame::Embedding(_), VisualEncoderParams::SmallCnn { .. }) => {
            Err(Error::InvalidConfig {
                detail: String::from("small_cnn visual encoder received an embedding frame"),
            })
        }
        (VisualFrame::Image(_), VisualEncoderParams::Passthrough { .. }) => {
            Err(Error::InvalidConfig {
                detail: String::from("passthrough visual encoder received an image frame"),
            })
        }
    }
}

/// Encodes a tactile frame sequence into a [64, T] feature map.
pub fn encode_tactile_sequence(
    frames: &[Tensor],
    params: &TactileEncoderParams,
) -> Result<Tensor> {
    let cols = frames
        .iter()
        .enumerate()
        .map(|(index, f)| {
            tactile_encode(f, params)
                .map_err(|e| Error::FrameEncode { index, detail: e.to_string() })
        })
        .collect::<Result<Vec<_>>>()?;
    stack_columns(&cols)
}

/// Encodes a visual frame sequence into a [64, T] feature map.
pub fn encode_visual_sequence(
    frames: &[VisualFrame],
    params: &VisualEncoderParams,
) -> Result<Tensor> {
    let cols = frames
        .iter()
        .enumerate()
        .map(|(index, f)| {
            visual_encode(f, params)
                .map_err(|e| Error::FrameEncode { index, detail: e.to_string() })
        })
        .collect::<Result<Vec<_>>>()?;
    stack_columns(&cols)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn rng(seed: u64) -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(seed)
    }

    #[test]
    fn tactile_encoder_maps_frame_to_feature_vector() {
        let params = TactileEncoderParams::init(&mut rng(3)).unwrap();
        let frame = Tensor::new(
            (0..48).map(|i| (i as f64) / 48.0).collect(),
            &TACTILE_FRAME_SHAPE,
        )
        .unwrap();
        let y = tactile_encode(&frame, &params).unwrap();
        assert_eq!(y.shape(), &[FEATURE_DIM]);
        assert!(y.to_vec().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn tactile_encoder_sends_zero_frame_to_zero_vector() {
        // zero biases and relu make the all-zero frame a fixed point
        let params = TactileEncoderParams::init(&mut rng(5)).unwrap();
        let y = tactile_encode(&Tensor::zeros(&TACTILE_FRAME_SHAPE), &params).unwrap();
        assert!(y.to_vec().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn tactile_encoder_rejects_wrong_frame_shape() {
        let params = TactileEncoderParams::init(&mut rng(0)).unwrap();
        assert!(tactile_encode(&Tensor::zeros(&[3, 4, 5]), &params).is_err());
        assert!(tactile_encode(&Tensor::zeros(&[48]), &params).is_err());
    }

    #[test]
    fn tactile_encoder_has_eight_named_tensors() {
        let params = TactileEncoderParams::init(&mut rng(0)).unwrap();
        let named = params.named_tensors("tactile_encoder");
        let names: Vec<&str> = named.iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(
            names,
            vec![
                "tactile_encoder.conv1.weight",
                "tactile_encoder.conv1.bias",
                "tactile_encoder.conv2.weight",
                "tactile_encoder.conv2.bias",
                "tactile_encoder.conv3.weight",
                "tactile_encoder.conv3.bias",
                "tactile_encoder.proj.weight",
                "tactile_encoder.proj.bias",
            ]
        );
        assert_eq!(named[0].1.shape(), &[8, 3, 3, 3]);
        assert_eq!(named[2].1.shape(), &[16, 8, 3, 3]);
        assert_eq!(named[4].1.shape(), &[32, 16, 1, 1]);
        assert_eq!(named[6].1.shape(), &[64, 32]);
    }

    #[test]
    fn passthrough_projects_embedding_to_feature_dim() {
        let mode = VisualMode::Passthrough { dim: 6 };
        let params = VisualEncoderParams::init(mode, &mut rng(1)).unwrap();
        let frame = VisualFrame::Embedding(Tensor::new(vec![0.5; 6], &[6]).unwrap());
        let y = visual_encode(&frame, &params).unwrap();
        assert_eq!(y.shape(), &[FEATURE_DIM]);
        let bad = VisualFrame::Embedding(Tensor::zeros(&[7]));
        assert!(visual_encode(&bad, &params).is_err(), "dim mismatch");
    }

    #[test]
    fn small_cnn_consumes_images_only() {
        let params = VisualEncoderParams::init(VisualMode::SmallCnn, &mut rng(2)).unwrap();
        let img = VisualFrame::Image(Tensor::zeros(&VISUAL_IMAGE_SHAPE));
        let y = visual_encode(&img, &params).unwrap();
        assert_eq!(y.shape(), &[FEATURE_DIM]);
        let emb = VisualFrame::Embedding(Tensor::zeros(&[512]));
        assert!(visual_encode(&emb, &params).is_err(), "mode/frame mismatch");
        let wrong = VisualFrame::Image(Tensor::zeros(&[3, 16, 16]));
        assert!(visual_encode(&wrong, &params).is_err(), "image size");
    }

    #[test]
    fn backbone_names_cover_conv_stages_only() {
        let pass = VisualEncoderParams::init(VisualMode::Passthrough { dim: 4 }, &mut rng(0)).unwrap();
        assert!(pass.backbone_names("v").is_empty());
        let cnn = VisualEncoderParams::init(VisualMode::SmallCnn, &mut rng(0)).unwrap();
        let names = cnn.backbone_names("v");
        assert_eq!(names.len(), 6);
        assert!(names.iter().all(|n| n.contains("conv")));
        assert!(!names.iter().any(|n| n.contains("proj")));
    }

    #[test]
    fn sequence_encoding_stacks_frames_as_columns() {
        let params = TactileEncoderParams::init(&mut rng(9)).unwrap();
        let frames: Vec<Tensor> = (0..3)
            .map(|k| {
                Tensor::new(
                    (0..48).map(|i| ((i + k * 48) as f64) / 144.0).collect(),
                    &TACTILE_FRAME_SHAPE,
                )
                .unwrap()
            })
            .collect();
        let seq = encode_tactile_sequence(&frames, &params).unwrap();
        assert_eq!(seq.shape(), &[FEATURE_DIM, 3]);
        // column t must equal the frame-t encoding
        for (k, frame) in frames.iter().enumerate() {
            let single = tactile_encode(frame, &params).unwrap();
            let col = seq.select_column(k).unwrap();
            assert_eq!(col.to_vec(), single.to_vec(), "column {k}");
        }
    }

    #[test]
    fn sequence_encoding_reports_failing_frame_index() {
        let params = TactileEncoderParams::init(&mut rng(9)).unwrap();
        let frames = vec![Tensor::zeros(&TACTILE_FRAME_SHAPE), Tensor::zeros(&[1, 4, 4])];
        let err = encode_tactile_sequence(&frames, &params).unwrap_err();
        match err {
            Error::FrameEncode { index, .. } => assert_eq!(index, 1),
            other => panic!("expected FrameEncode, got {other:?}"),
        }
        assert!(encode_tactile_sequence(&[], &params).is_err(), "empty sequence");
    }

    #[test]
    fn visual_mode_validation() {
        assert!(VisualMode::Passthrough { dim: 0 }.validate().is_err());
        assert!(VisualMode::Passthrough { dim: 512 }.validate().is_ok());
        assert!(VisualMode::SmallCnn.validate().is_ok());
    }
}
