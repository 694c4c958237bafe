//! Forward implementations of the differentiable ops.
//!
//! Conventions shared by every op:
//! - layouts are row-major; a feature map is [C, T] (1-d) or [C, H, W] (2-d),
//!   a batch of vectors is [N, D];
//! - shape errors name the op and both shapes, so a failure deep inside a
//!   model identifies its stage;
//! - causal 1-d convolution left-pads with (k - 1) * dilation implicit zeros,
//!   output length equals input length, and output t never reads past
//!   input t.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::autograd::Op;
use crate::error::{Error, Result};
use crate::math;
use crate::tensor::Tensor;

fn require_rank(op: &'static str, t: &Tensor, rank: usize) -> Result<()> {
    if t.shape().len() != rank {
        return Err(Error::ShapeMismatch {
            op,
            detail: format!("expected rank-{rank} tensor, got shape {:?}", t.shape()),
        });
    }
    Ok(())
}

impl Tensor {
    /// Causal dilated 1-d convolution.
    ///
    /// `self` is [C_in, T], `w` is [C_out, C_in, k], `b` is [C_out]; the
    /// result is [C_out, T]. Positions before the start of the signal read
    /// as zero.
    pub fn conv1d_causal(&self, w: &Tensor, b: &Tensor, dilation: usize) -> Result<Tensor> {
        require_rank("conv1d_causal", self, 2)?;
        require_rank("conv1d_causal", w, 3)?;
        require_rank("conv1d_causal", b, 1)?;
        let (c_in, t_len) = (self.shape()[0], self.shape()[1]);
        let (c_out, k) = (w.shape()[0], w.shape()[2]);
        if dilation == 0 || k == 0 {
            return Err(Error::InvalidConfig {
                detail: format!("conv1d_causal needs kernel >= 1 and dilation >= 1, got k={k} d={dilation}"),
            });
        }
        if w.shape()[1] != c_in {
            return Err(Error::ShapeMismatch {
                op: "conv1d_causal",
                detail: format!("input has {c_in} channels but weight is {:?}", w.shape()),
            });
        }
        if b.shape()[0] != c_out {
            return Err(Error::ShapeMismatch {
                op: "conv1d_causal",
                detail: format!("weight has {c_out} output channels but bias is {:?}", b.shape()),
            });
        }
        let xd = self.data();
        let wd = w.data();
        let bd = b.data();
        let mut y = vec![0.0; c_out * t_len];
        for co in 0..c_out {
            let y_row = &mut y[co * t_len..(co + 1) * t_len];
            y_row.fill(bd[co]);
            for ci in 0..c_in {
                let x_row = &xd[ci * t_len..(ci + 1) * t_len];
                for i in 0..k {
                    let wv = wd[(co * c_in + ci) * k + i];
                    let off = i * dilation;
                    if off >= t_len {
                        // Tap reaches entirely into the implicit left padding.
                        continue;
                    }
                    for t in off..t_len {
                        y_row[t] += wv * x_row[t - off];
                    }
                }
            }
        }
        drop(xd);
        drop(wd);
        drop(bd);
        Ok(Tensor::from_op(
            y,
            vec![c_out, t_len],
            Op::Conv1dCausal { x: self.clone(), w: w.clone(), b: b.clone(), dilation },
        ))
    }

    /// 2-d convolution with zero padding.
    ///
    /// `self` is [C_in, H, W], `w` is [C_out, C_in, kh, kw], `b` is [C_out];
    /// output spatial size is floor((dim + 2*pad - k) / stride) + 1.
    pub fn conv2d(
        &self,
        w: &Tensor,
        b: &Tensor,
        stride: (usize, usize),
        padding: (usize, usize),
    ) -> Result<Tensor> {
        require_rank("conv2d", self, 3)?;
        require_rank("conv2d", w, 4)?;
        require_rank("conv2d", b, 1)?;
        let (c_in, h, w_in) = (self.shape()[0], self.shape()[1], self.shape()[2]);
        let (c_out, kh, kw) = (w.shape()[0], w.shape()[2], w.shape()[3]);
        let (sh, sw) = stride;
        let (ph, pw) = padding;
        if sh == 0 || sw == 0 || kh == 0 || kw == 0 {
            return Err(Error::InvalidConfig {
                detail: format!("conv2d needs kernel and stride >= 1, got k=({kh},{kw}) s=({sh},{sw})"),
            });
        }
        if w.shape()[1] != c_in {
            return Err(Error::ShapeMismatch {
                op: "conv2d",
                detail: format!("input has {c_in} channels but weight is {:?}", w.shape()),
            });
        }
        if b.shape()[0] != c_out {
            return Err(Error::ShapeMismatch {
                op: "conv2d",
                detail: format!("weight has {c_out} output channels but bias is {:?}", b.shape()),
            });
        }
        if h + 2 * ph < kh || w_in + 2 * pw < kw {
            return Err(Error::ShapeMismatch {
                op: "conv2d",
                detail: format!(
                    "kernel ({kh},{kw}) larger than padded input ({},{})",
                    h + 2 * ph,
                    w_in + 2 * pw
                ),
            });
        }
        let h_out = (h + 2 * ph - kh) / sh + 1;
        let w_out = (w_in + 2 * pw - kw) / sw + 1;
        let xd = self.data();
        let wd = w.data();
        let bd = b.data();
        let mut y = vec![0.0; c_out * h_out * w_out];
        for co in 0..c_out {
            for oh in 0..h_out {
                for ow in 0..w_out {
                    let mut acc = bd[co];
                    for ci in 0..c_in {
                        for i in 0..kh {
                            let ih = (oh * sh + i) as isize - ph as isize;
                            if ih < 0 || ih as usize >= h {
                                continue;
                            }
                            for j in 0..kw {
                                let iw = (ow * sw + j) as isize - pw as isize;
                                if iw < 0 || iw as usize >= w_in {
                                    continue;
                                }
                                acc += wd[((co * c_in + ci) * kh + i) * kw + j]
                                    * xd[(ci * h + ih as usize) * w_in + iw as usize];
                            }
                        }
                    }
                    y[(co * h_out + oh) * w_out + ow] = acc;
                }
            }
        }
        drop(xd);
        drop(wd);
        drop(bd);
        Ok(Tensor::from_op(
            y,
            vec![c_out, h_out, w_out],
            Op::Conv2d { x: self.clone(), w: w.clone(), b: b.clone(), stride, padding },
        ))
    }

    /// 2-d max pooling without padding; ties resolve to the first element in
    /// row-major window order, and only that element receives gradient.
    pub fn maxpool2d(&self, size: (usize, usize), stride: (usize, usize)) -> Result<Tensor> {
        require_rank("maxpool2d", self, 3)?;
        let (c, h, w_in) = (self.shape()[0], self.shape()[1], self.shape()[2]);
        let (ih, iw) = size;
        let (sh, sw) = stride;
        if ih == 0 || iw == 0 || sh == 0 || sw == 0 {
            return Err(Error::InvalidConfig {
                detail: format!("maxpool2d needs window and stride >= 1, got w=({ih},{iw}) s=({sh},{sw})"),
            });
        }
        if ih > h || iw > w_in {
            return Err(Error::ShapeMismatch {
                op: "maxpool2d",
                detail: format!("window ({ih},{iw}) larger than input ({h},{w_in})"),
            });
        }
        let h_out = (h - ih) / sh + 1;
        let w_out = (w_in - iw) / sw + 1;
        let xd = self.data();
        let mut y = vec![0.0; c * h_out * w_out];
        let mut argmax = vec![0usize; c * h_out * w_out];
        for ci in 0..c {
            for oh in 0..h_out {
                for ow in 0..w_out {
                    let mut best = f64::NEG_INFINITY;
                    let mut best_idx = 0usize;
                    for i in 0..ih {
                        for j in 0..iw {
                            let idx = (ci * h + oh * sh + i) * w_in + ow * sw + j;
                            if xd[idx] > best {
                                best = xd[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    let o = (ci * h_out + oh) * w_out + ow;
                    y[o] = best;
                    argmax[o] = best_idx;
                }
            }
        }
        drop(xd);
        Ok(Tensor::from_op(
            y,
            vec![c, h_out, w_out],
            Op::MaxPool2d { x: self.clone(), argmax },
        ))
    }

    /// Affine map of a batch of row vectors: [N, D_in] x [D_out, D_in]^T +
    /// [D_out] -> [N, D_out].
    pub fn linear(&self, w: &Tensor, b: &Tensor) -> Result<Tensor> {
        require_rank("linear", self, 2)?;
        require_rank("linear", w, 2)?;
        require_rank("linear", b, 1)?;
        let (n, d_in) = (self.shape()[0], self.shape()[1]);
        let (d_out, w_in) = (w.shape()[0], w.shape()[1]);
        if w_in != d_in {
            return Err(Error::ShapeMismatch {
                op: "linear",
                detail: format!("input features {d_in} do not match weight {:?}", w.shape()),
            });
        }
        if b.shape()[0] != d_out {
            return Err(Error::ShapeMismatch {
                op: "linear",
                detail: format!("weight rows {d_out} do not match bias {:?}", b.shape()),
            });
        }
        let xd = self.data();
        let wd = w.data();
        let bd = b.data();
        let mut y = vec![0.0; n * d_out];
        for s in 0..n {
            let x_row = &xd[s * d_in..(s + 1) * d_in];
            for o in 0..d_out {
                let w_row = &wd[o * d_in..(o + 1) * d_in];
                let mut acc = bd[o];
                for i in 0..d_in {
                    acc += x_row[i] * w_row[i];
                }
                y[s * d_out + o] = acc;
            }
        }
        drop(xd);
        drop(wd);
        drop(bd);
        Ok(Tensor::from_op(
            y,
            vec![n, d_out],
            Op::Linear { x: self.clone(), w: w.clone(), b: b.clone() },
        ))
    }

    /// Elementwise max(x, 0). Gradient is zero at and below the kink.
    pub fn relu(&self) -> Tensor {
        let y: Vec<f64> = self.data().iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect();
        Tensor::from_op(y, self.shape().to_vec(), Op::Relu { x: self.clone() })
    }

    /// Concatenates two [C, T] maps along the channel axis. Either side may
    /// have zero channels.
    pub fn concat_channels(&self, other: &Tensor) -> Result<Tensor> {
        require_rank("concat_channels", self, 2)?;
        require_rank("concat_channels", other, 2)?;
        if self.shape()[1] != other.shape()[1] {
            return Err(Error::ShapeMismatch {
                op: "concat_channels",
                detail: format!(
                    "time lengths differ: {:?} vs {:?}",
                    self.shape(),
                    other.shape()
                ),
            });
        }
        let mut data = self.to_vec();
        data.extend_from_slice(&other.data());
        let shape = vec![self.shape()[0] + other.shape()[0], self.shape()[1]];
        Ok(Tensor::from_op(
            data,
            shape,
            Op::ConcatChannels { a: self.clone(), b: other.clone() },
        ))
    }

    /// Mean over samples of the softmax cross-entropy against integer
    /// labels. `self` is [N, K] logits; the result is a [1] scalar.
    ///
    /// The softmax subtracts the row max first, so large logits cannot
    /// overflow into NaN.
    pub fn softmax_cross_entropy(&self, labels: &[usize]) -> Result<Tensor> {
        require_rank("softmax_cross_entropy", self, 2)?;
        let (n, classes) = (self.shape()[0], self.shape()[1]);
        if n == 0 || classes < 2 {
            return Err(Error::ShapeMismatch {
                op: "softmax_cross_entropy",
                detail: format!("need at least 1 sample and 2 classes, got {:?}", self.shape()),
            });
        }
        if labels.len() != n {
            return Err(Error::ShapeMismatch {
                op: "softmax_cross_entropy",
                detail: format!("{n} samples but {} labels", labels.len()),
            });
        }
        for (index, &label) in labels.iter().enumerate() {
            if label >= classes {
                return Err(Error::InvalidLabel { index, label, classes });
            }
        }
        let xd = self.data();
        let mut probs = vec![0.0; n * classes];
        let mut loss = 0.0;
        for s in 0..n {
            let row = &xd[s * classes..(s + 1) * classes];
            let max = row.iter().fold(f64::NEG_INFINITY, |m, &v| if v > m { v } else { m });
            let mut denom = 0.0;
            for kk in 0..classes {
                let e = math::exp(row[kk] - max);
                probs[s * classes + kk] = e;
                denom += e;
            }
            for kk in 0..classes {
                probs[s * classes + kk] /= denom;
            }
            // -log p[label], computed from the stabilized logits directly.
            loss += math::ln(denom) - (row[labels[s]] - max);
        }
        loss /= n as f64;
        drop(xd);
        Ok(Tensor::from_op(
            vec![loss],
            vec![1],
            Op::SoftmaxCrossEntropy {
                logits: self.clone(),
                probs,
                labels: labels.to_vec(),
            },
        ))
    }

    /// Elementwise sum of two same-shape tensors.
    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                op: "add",
                detail: format!("{:?} vs {:?}", self.shape(), other.shape()),
            });
        }
        let y: Vec<f64> = self.data().iter().zip(other.data().iter()).map(|(a, b)| a + b).collect();
        Ok(Tensor::from_op(
            y,
            self.shape().to_vec(),
            Op::Add { a: self.clone(), b: other.clone() },
        ))
    }

    /// Elementwise product of two same-shape tensors.
    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                op: "mul",
                detail: format!("{:?} vs {:?}", self.shape(), other.shape()),
            });
        }
        let y: Vec<f64> = self.data().iter().zip(other.data().iter()).map(|(a, b)| a * b).collect();
        Ok(Tensor::from_op(
            y,
            self.shape().to_vec(),
            Op::Mul { a: self.clone(), b: other.clone() },
        ))
    }

    /// Sum of all elements, as a [1] scalar.
    pub fn sum(&self) -> Tensor {
        let total: f64 = self.data().iter().sum();
        Tensor::from_op(vec![total], vec![1], Op::Sum { x: self.clone() })
    }

    /// Same data, new shape; element count must match.
    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor> {
        let expected: usize = shape.iter().product();
        if expected != self.numel() {
            return Err(Error::ShapeMismatch {
                op: "reshape",
                detail: format!("cannot view {:?} as {:?}", self.shape(), shape),
            });
        }
        Ok(Tensor::from_op(self.to_vec(), shape.to_vec(), Op::Reshape { x: self.clone() }))
    }

    /// Extracts column `t` of a [C, T] map as a [C] vector.
    pub fn select_column(&self, t: usize) -> Result<Tensor> {
        require_rank("select_column", self, 2)?;
        let (c, t_len) = (self.shape()[0], self.shape()[1]);
        if t >= t_len {
            return Err(Error::ShapeMismatch {
                op: "select_column",
                detail: format!("column {t} out of range for shape {:?}", self.shape()),
            });
        }
        let xd = self.data();
        let y: Vec<f64> = (0..c).map(|ci| xd[ci * t_len + t]).collect();
        drop(xd);
        Ok(Tensor::from_op(y, vec![c], Op::SelectColumn { x: self.clone(), t }))
    }

    /// Mean over the time axis of a [C, T] map, as a [C] vector.
    pub fn mean_columns(&self) -> Result<Tensor> {
        require_rank("mean_columns", self, 2)?;
        let (c, t_len) = (self.shape()[0], self.shape()[1]);
        if t_len == 0 {
            return Err(Error::ShapeMismatch {
                op: "mean_columns",
                detail: format!("empty time axis in {:?}", self.shape()),
            });
        }
        let xd = self.data();
        let y: Vec<f64> = (0..c)
            .map(|ci| xd[ci * t_len..(ci + 1) * t_len].iter().sum::<f64>() / t_len as f64)
            .collect();
        drop(xd);
        Ok(Tensor::from_op(y, vec![c], Op::MeanColumns { x: self.clone() }))
    }
}

/// Stacks T rank-1 [C] vectors into a [C, T] map, one column per part.
pub fn stack_columns(parts: &[Tensor]) -> Result<Tensor> {
    if parts.is_empty() {
        return Err(Error::ShapeMismatch {
            op: "stack_columns",
            detail: "no columns to stack".into(),
        });
    }
    let c = parts[0].numel();
    for (i, p) in parts.iter().enumerate() {
        require_rank("stack_columns", p, 1)?;
        if p.numel() != c {
            return Err(Error::ShapeMismatch {
                op: "stack_columns",
                detail: format!("column {i} has shape {:?}, expected [{c}]", p.shape()),
            });
        }
    }
    let t_len = parts.len();
    let mut data = vec![0.0; c * t_len];
    for (t, part) in parts.iter().enumerate() {
        let pd = part.data();
        for ci in 0..c {
            data[ci * t_len + t] = pd[ci];
        }
    }
    Ok(Tensor::from_op(
        data,
        vec![c, t_len],
        Op::StackColumns { parts: parts.to_vec() },
    ))
}

/// Stacks N rank-1 [D] vectors into an [N, D] matrix, one row per part.
pub fn stack_rows(parts: &[Tensor]) -> Result<Tensor> {
    if parts.is_empty() {
        return Err(Error::ShapeMismatch {
            op: "stack_rows",
            detail: "no rows to stack".into(),
        });
    }
    let d = parts[0].numel();
    for (i, p) in parts.iter().enumerate() {
        require_rank("stack_rows", p, 1)?;
        if p.numel() != d {
            return Err(Error::ShapeMismatch {
                op: "stack_rows",
                detail: format!("row {i} has shape {:?}, expected [{d}]", p.shape()),
            });
        }
    }
    let mut data = Vec::with_capacity(parts.len() * d);
    for part in parts {
        data.extend_from_slice(&part.data());
    }
    Ok(Tensor::from_op(
        data,
        vec![parts.len(), d],
        Op::StackRows { parts: parts.to_vec() },
    ))
}
