//! Graph records and the reverse-mode sweep.
//!
//! Each op output stores an [`Op`] naming its operands plus whatever forward
//! by-products the backward rule needs (softmax probabilities, pool argmax
//! indices). The sweep walks nodes in reverse topological order, keyed by
//! creation id, so gradient accumulation order is fixed and runs are
//! reproducible.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use crate::tensor::Tensor;

pub(crate) enum Op {
    /// y[co, t] = b[co] + sum_{ci, i} w[co, ci, i] * x[ci, t - i*dilation]
    Conv1dCausal { x: Tensor, w: Tensor, b: Tensor, dilation: usize },
    Conv2d {
        x: Tensor,
        w: Tensor,
        b: Tensor,
        stride: (usize, usize),
        padding: (usize, usize),
    },
    /// `argmax[o]` is the flat input index that won output element `o`.
    MaxPool2d { x: Tensor, argmax: Vec<usize> },
    Linear { x: Tensor, w: Tensor, b: Tensor },
    Relu { x: Tensor },
    /// Row-block concatenation of two [C, T] maps along the channel axis.
    ConcatChannels { a: Tensor, b: Tensor },
    /// Mean over samples of -log softmax(logits)[label]; `probs` caches the
    /// row-wise softmax from the forward pass.
    SoftmaxCrossEntropy { logits: Tensor, probs: Vec<f64>, labels: Vec<usize> },
    Add { a: Tensor, b: Tensor },
    Mul { a: Tensor, b: Tensor },
    Sum { x: Tensor },
    Reshape { x: Tensor },
    /// parts[t] is column t of the [C, T] output.
    StackColumns { parts: Vec<Tensor> },
    /// parts[n] is row n of the [N, D] output.
    StackRows { parts: Vec<Tensor> },
    SelectColumn { x: Tensor, t: usize },
    MeanColumns { x: Tensor },
}

impl Op {
    /// Operands in a fixed order; the traversal order of the sweep (and so
    /// its numerics) follows from it.
    pub(crate) fn parents(&self) -> Vec<&Tensor> {
        match self {
            Op::Conv1dCausal { x, w, b, .. } => alloc::vec![x, w, b],
            Op::Conv2d { x, w, b, .. } => alloc::vec![x, w, b],
            Op::MaxPool2d { x, .. } => alloc::vec![x],
            Op::Linear { x, w, b } => alloc::vec![x, w, b],
            Op::Relu { x } => alloc::vec![x],
            Op::ConcatChannels { a, b } => alloc::vec![a, b],
            Op::SoftmaxCrossEntropy { logits, .. } => alloc::vec![logits],
            Op::Add { a, b } => alloc::vec![a, b],
            Op::Mul { a, b } => alloc::vec![a, b],
            Op::Sum { x } => alloc::vec![x],
            Op::Reshape { x } => alloc::vec![x],
            Op::StackColumns { parts } => parts.iter().collect(),
            Op::StackRows { parts } => parts.iter().collect(),
            Op::SelectColumn { x, .. } => alloc::vec![x],
            Op::MeanColumns { x } => alloc::vec![x],
        }
    }

    fn backward(&self, dy: &[f64], grads: &mut GradMap) {
        match self {
            Op::Conv1dCausal { x, w, b, dilation } => {
                let (c_in, t_len) = (x.shape()[0], x.shape()[1]);
                let (c_out, k) = (w.shape()[0], w.shape()[2]);
                let xd = x.data();
                let wd = w.data();
                if let Some(gx) = grads.slot(x) {
                    for co in 0..c_out {
                        let dy_row = &dy[co * t_len..(co + 1) * t_len];
                        for ci in 0..c_in {
                            let gx_row = &mut gx[ci * t_len..(ci + 1) * t_len];
                            for i in 0..k {
                                let wv = wd[(co * c_in + ci) * k + i];
                                let off = i * dilation;
                                for t in off..t_len {
                                    gx_row[t - off] += wv * dy_row[t];
                                }
                            }
                        }
                    }
                }
                if let Some(gw) = grads.slot(w) {
                    for co in 0..c_out {
                        let dy_row = &dy[co * t_len..(co + 1) * t_len];
                        for ci in 0..c_in {
                            let x_row = &xd[ci * t_len..(ci + 1) * t_len];
                            for i in 0..k {
                                let off = i * dilation;
                                let mut acc = 0.0;
                                for t in off..t_len {
                                    acc += dy_row[t] * x_row[t - off];
                                }
                                gw[(co * c_in + ci) * k + i] += acc;
                            }
                        }
                    }
                }
                if let Some(gb) = grads.slot(b) {
                    for co in 0..c_out {
                        gb[co] += dy[co * t_len..(co + 1) * t_len].iter().sum::<f64>();
                    }
                }
            }
            Op::Conv2d { x, w, b, stride, padding } => {
                let (c_in, h, wd_in) = (x.shape()[0], x.shape()[1], x.shape()[2]);
                let (c_out, kh, kw) = (w.shape()[0], w.shape()[2], w.shape()[3]);
                let (sh, sw) = *stride;
                let (ph, pw) = *padding;
                let h_out = (h + 2 * ph - kh) / sh + 1;
                let w_out = (wd_in + 2 * pw - kw) / sw + 1;
                let xd = x.data();
                let wdat = w.data();
                if let Some(gx) = grads.slot(x) {
                    for co in 0..c_out {
                        for oh in 0..h_out {
                            for ow in 0..w_out {
                                let g = dy[(co * h_out + oh) * w_out + ow];
                                for ci in 0..c_in {
                                    for i in 0..kh {
                                        let ih = (oh * sh + i) as isize - ph as isize;
                                        if ih < 0 || ih as usize >= h {
                                            continue;
                                        }
                                        for j in 0..kw {
                                            let iw = (ow * sw + j) as isize - pw as isize;
                                            if iw < 0 || iw as usize >= wd_in {
                                                continue;
                                            }
                                            gx[(ci * h + ih as usize) * wd_in + iw as usize] +=
                                                g * wdat[((co * c_in + ci) * kh + i) * kw + j];
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                if let Some(gw) = grads.slot(w) {
                    for co in 0..c_out {
                        for oh in 0..h_out {
                            for ow in 0..w_out {
                                let g = dy[(co * h_out + oh) * w_out + ow];
                                for ci in 0..c_in {
                                    for i in 0..kh {
                                        let ih = (oh * sh + i) as isize - ph as isize;
                                        if ih < 0 || ih as usize >= h {
                                            continue;
                                        }
                                        for j in 0..kw {
                                            let iw = (ow * sw + j) as isize - pw as isize;
                                            if iw < 0 || iw as usize >= wd_in {
                                                continue;
                                            }
                                            gw[((co * c_in + ci) * kh + i) * kw + j] +=
                                                g * xd[(ci * h + ih as usize) * wd_in + iw as usize];
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                if let Some(gb) = grads.slot(b) {
                    for co in 0..c_out {
                        gb[co] += dy[co * h_out * w_out..(co + 1) * h_out * w_out]
                            .iter()
                            .sum::<f64>();
                    }
                }
            }
            Op::MaxPool2d { x, argmax } => {
                if let Some(gx) = grads.slot(x) {
                    for (o, &src) in argmax.iter().enumerate() {
                        gx[src] += dy[o];
                    }
                }
            }
            Op::Linear { x, w, b } => {
                let (n, d_in) = (x.shape()[0], x.shape()[1]);
                let d_out = w.shape()[0];
                let xd = x.data();
                let wd = w.data();
                if let Some(gx) = grads.slot(x) {
                    for s in 0..n {
                        for o in 0..d_out {
                            let g = dy[s * d_out + o];
                            let w_row = &wd[o * d_in..(o + 1) * d_in];
                            let gx_row = &mut gx[s * d_in..(s + 1) * d_in];
                            for i in 0..d_in {
                                gx_row[i] += g * w_row[i];
                            }
                        }
                    }
                }
                if let Some(gw) = grads.slot(w) {
                    for s in 0..n {
                        let x_row = &xd[s * d_in..(s + 1) * d_in];
                        for o in 0..d_out {
                            let g = dy[s * d_out + o];
                            let gw_row = &mut gw[o * d_in..(o + 1) * d_in];
                            for i in 0..d_in {
                                gw_row[i] += g * x_row[i];
                            }
                        }
                    }
                }
                if let Some(gb) = grads.slot(b) {
                    for s in 0..n {
                        for o in 0..d_out {
                            gb[o] += dy[s * d_out + o];
                        }
                    }
                }
            }
            Op::Relu { x } => {
                let xd = x.data();
                if let Some(gx) = grads.slot(x) {
                    for (i, g) in gx.iter_mut().enumerate() {
                        if xd[i] > 0.0 {
                            *g += dy[i];
                        }
                    }
                }
            }
            Op::ConcatChannels { a, b } => {
                let len_a = a.numel();
                if let Some(ga) = grads.slot(a) {
                    for (g, d) in ga.iter_mut().zip(&dy[..len_a]) {
                        *g += d;
                    }
                }
                if let Some(gb) = grads.slot(b) {
                    for (g, d) in gb.iter_mut().zip(&dy[len_a..]) {
                        *g += d;
                    }
                }
            }
            Op::SoftmaxCrossEntropy { logits, probs, labels } => {
                let classes = logits.shape()[1];
                let n = labels.len() as f64;
                if let Some(gl) = grads.slot(logits) {
                    for (s, &label) in labels.iter().enumerate() {
                        for kk in 0..classes {
                            let indicator = if kk == label { 1.0 } else { 0.0 };
                            gl[s * classes + kk] +=
                                dy[0] * (probs[s * classes + kk] - indicator) / n;
                        }
                    }
                }
            }
            Op::Add { a, b } => {
                if let Some(ga) = grads.slot(a) {
                    for (g, d) in ga.iter_mut().zip(dy) {
                        *g += d;
                    }
                }
                if let Some(gb) = grads.slot(b) {
                    for (g, d) in gb.iter_mut().zip(dy) {
                        *g += d;
                    }
                }
            }
            Op::Mul { a, b } => {
                let ad = a.data();
                let bd = b.data();
                if let Some(ga) = grads.slot(a) {
                    for i in 0..dy.len() {
                        ga[i] += dy[i] * bd[i];
                    }
                }
                if let Some(gb) = grads.slot(b) {
                    for i in 0..dy.len() {
                        gb[i] += dy[i] * ad[i];
                    }
                }
            }
            Op::Sum { x } => {
                if let Some(gx) = grads.slot(x) {
                    for g in gx.iter_mut() {
                        *g += dy[0];
                    }
                }
            }
            Op::Reshape { x } => {
                if let Some(gx) = grads.slot(x) {
                    for (g, d) in gx.iter_mut().zip(dy) {
                        *g += d;
                    }
                }
            }
            Op::StackColumns { parts } => {
                let t_len = parts.len();
                for (t, part) in parts.iter().enumerate() {
                    if let Some(gp) = grads.slot(part) {
                        for (c, g) in gp.iter_mut().enumerate() {
                            *g += dy[c * t_len + t];
                        }
                    }
                }
            }
            Op::StackRows { parts } => {
                for (s, part) in parts.iter().enumerate() {
                    let d = part.numel();
                    if let Some(gp) = grads.slot(part) {
                        for (g, v) in gp.iter_mut().zip(&dy[s * d..(s + 1) * d]) {
                            *g += v;
                        }
                    }
                }
            }
            Op::SelectColumn { x, t } => {
                let t_len = x.shape()[1];
                if let Some(gx) = grads.slot(x) {
                    for (c, d) in dy.iter().enumerate() {
                        gx[c * t_len + t] += d;
                    }
                }
            }
            Op::MeanColumns { x } => {
                let t_len = x.shape()[1];
                let scale = 1.0 / t_len as f64;
                if let Some(gx) = grads.slot(x) {
                    for c in 0..dy.len() {
                        let contrib = dy[c] * scale;
                        for t in 0..t_len {
                            gx[c * t_len + t] += contrib;
                        }
                    }
                }
            }
        }
    }
}

/// Transient per-sweep gradient buffers, keyed by node id.
struct GradMap {
    map: BTreeMap<u64, Vec<f64>>,
}

impl GradMap {
    /// Zero-initialized buffer for a tracked operand; `None` for constants so
    /// rules can skip the work entirely.
    fn slot(&mut self, t: &Tensor) -> Option<&mut Vec<f64>> {
        if !t.is_tracked() {
            return None;
        }
        Some(
            self.map
                .entry(t.id())
                .or_insert_with(|| alloc::vec![0.0; t.numel()]),
        )
    }
}

/// Post-order DFS over tracked nodes: parents appear before children, so the
/// reversed list is a valid propagation order.
fn topo_order(root: &Tensor) -> Vec<Tensor> {
    enum Frame {
        Enter(Tensor),
        Exit(Tensor),
    }
    let mut order = Vec::new();
    let mut visited: BTreeSet<u64> = BTreeSet::new();
    let mut stack = alloc::vec![Frame::Enter(root.clone())];
    while let Some(frame) = stack.pop() {
        match frame {
            Frame::Enter(t) => {
                if !visited.insert(t.id()) {
                    continue;
                }
                stack.push(Frame::Exit(t.clone()));
                if let Some(op) = t.op() {
                    for parent in op.parents() {
                        if parent.is_tracked() && !visited.contains(&parent.id()) {
                            stack.push(Frame::Enter(parent.clone()));
                        }
                    }
                }
            }
            Frame::Exit(t) => order.push(t),
        }
    }
    order
}

pub(crate) fn run_backward(root: &Tensor) {
    if !root.is_tracked() {
        // Loss over constants only: nothing requires a gradient.
        return;
    }
    let order = topo_order(root);
    let mut grads = GradMap { map: BTreeMap::new() };
    grads.map.insert(root.id(), alloc::vec![1.0]);
    for node in order.iter().rev() {
        let Some(dy) = grads.map.remove(&node.id()) else {
            continue;
        };
        if node.requires_grad() {
            node.accumulate_grad(&dy);
        }
        if let Some(op) = node.op() {
            op.backward(&dy, &mut grads);
        }
    }
}
