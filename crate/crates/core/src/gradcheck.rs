//! Finite-difference gradient checking.
//!
//! Each case builds a scalar loss over small randomized tensors, runs the
//! analytic backward pass, then probes every element of every checked leaf
//! with a central difference at h = 1e-5. The relative error uses
//! |a - n| / max(|a|, |n|, 1e-4), so tiny gradients are judged on absolute
//! error instead of blowing up the ratio.
//!
//! ReLU and max-pool are only piecewise differentiable; cases that cross
//! them resample their inputs until every pre-activation sits further than
//! 1e-3 from a kink (and every pool window has a clear winner), which a
//! 1e-5 probe cannot cross.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::Result;
use crate::ops::{stack_columns, stack_rows};
use crate::tcn::{mstcn_layer_forward, MsTcnLayerConfig, MsTcnLayerWeights};
use crate::tensor::Tensor;

pub const DEFAULT_CASES: usize = 200;
pub const FD_STEP: f64 = 1e-5;
pub const REL_TOL: f64 = 1e-4;
const KINK_MARGIN: f64 = 1e-3;
const MAX_RESAMPLES: usize = 100;

/// One gradient element that exceeded the tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckFailure {
    pub case: usize,
    pub op: String,
    pub leaf: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpStat {
    pub op: String,
    pub cases: usize,
    pub max_rel_err: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckOutcome {
    pub cases_run: usize,
    pub elements_checked: usize,
    pub max_rel_err: f64,
    pub per_op: Vec<OpStat>,
    pub failures: Vec<GradCheckFailure>,
}

impl GradCheckOutcome {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// A randomized case: named differentiable leaves, a loss builder that reads
/// the leaves' current data, and the distance to the nearest kink.
struct Case {
    op: &'static str,
    leaves: Vec<(String, Tensor)>,
    build: Box<dyn Fn() -> Result<Tensor>>,
    /// Margin to the nearest nondifferentiable point; `f64::INFINITY` for
    /// smooth cases.
    margin: Box<dyn Fn() -> Result<f64>>,
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, len: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(lo..hi)).collect()
}

fn param<R: Rng + ?Sized>(rng: &mut R, shape: &[usize]) -> Tensor {
    let len = shape.iter().product();
    Tensor::param(uniform(rng, len, -1.0, 1.0), shape).expect("finite uniform data")
}

fn weight_const<R: Rng + ?Sized>(rng: &mut R, shape: &[usize]) -> Tensor {
    let len = shape.iter().product();
    // Loss weights stay away from zero so no gradient path is accidentally
    // muted.
    let data: Vec<f64> = (0..len)
        .map(|_| {
            let v: f64 = rng.random_range(0.25..1.0);
            if rng.random_range(0..2) == 0 {
                -v
            } else {
                v
            }
        })
        .collect();
    Tensor::new(data, shape).expect("finite weight data")
}

/// sum(y ⊙ r): a random weighting makes the loss sensitive to every output
/// element with a distinct coefficient.
fn weighted_sum(y: &Tensor, r: &Tensor) -> Result<Tensor> {
    Ok(y.mul(r)?.sum())
}

fn min_abs(t: &Tensor) -> f64 {
    t.data().iter().fold(f64::INFINITY, |m, &v| {
        let a = if v < 0.0 { -v } else { v };
        if a < m {
            a
        } else {
            m
        }
    })
}

fn make_case<R: Rng + ?Sized>(kind: usize, rng: &mut R) -> Case {
    match kind {
        0 | 1 | 2 => {
            // conv1d_causal at dilation 1 / 2 / 4.
            let dilation = 1usize << kind;
            let c_in = rng.random_range(1..=3);
            let c_out = rng.random_range(1..=4);
            let k = rng.random_range(1..=3);
            let t_len = rng.random_range(5..=8);
            let x = param(rng, &[c_in, t_len]);
            let w = param(rng, &[c_out, c_in, k]);
            let b = param(rng, &[c_out]);
            let r = weight_const(rng, &[c_out, t_len]);
            let (xc, wc, bc, rc) = (x.clone(), w.clone(), b.clone(), r.clone());
            Case {
                op: "conv1d_causal",
                leaves: vec![("x".into(), x), ("w".into(), w), ("b".into(), b)],
                build: Box::new(move || weighted_sum(&xc.conv1d_causal(&wc, &bc, dilation)?, &rc)),
                margin: Box::new(|| Ok(f64::INFINITY)),
            }
        }
        3 => {
            // conv2d, unit stride, padding 1.
            let c_in = rng.random_range(1..=3);
            let c_out = rng.random_range(1..=4);
            let h = rng.random_range(3..=5);
            let x = param(rng, &[c_in, h, h]);
            let w = param(rng, &[c_out, c_in, 3, 3]);
            let b = param(rng, &[c_out]);
            let r = weight_const(rng, &[c_out, h, h]);
            let (xc, wc, bc, rc) = (x.clone(), w.clone(), b.clone(), r.clone());
            Case {
                op: "conv2d",
                leaves: vec![("x".into(), x), ("w".into(), w), ("b".into(), b)],
                build: Box::new(move || weighted_sum(&xc.conv2d(&wc, &bc, (1, 1), (1, 1))?, &rc)),
                margin: Box::new(|| Ok(f64::INFINITY)),
            }
        }
        4 => {
            // conv2d, stride 2, no padding.
            let c_in = rng.random_range(1..=2);
            let c_out = rng.random_range(1..=3);
            let x = param(rng, &[c_in, 6, 6]);
            let w = param(rng, &[c_out, c_in, 2, 2]);
            let b = param(rng, &[c_out]);
            let r = weight_const(rng, &[c_out, 3, 3]);
            let (xc, wc, bc, rc) = (x.clone(), w.clone(), b.clone(), r.clone());
            Case {
                op: "conv2d",
                leaves: vec![("x".into(), x), ("w".into(), w), ("b".into(), b)],
                build: Box::new(move || weighted_sum(&xc.conv2d(&wc, &bc, (2, 2), (0, 0))?, &rc)),
                margin: Box::new(|| Ok(f64::INFINITY)),
            }
        }
        5 => {
            // maxpool2d; margin is the smallest max-vs-runner-up gap over
            // all pool windows.
            let c = rng.random_range(1..=3);
            let x = param(rng, &[c, 4, 4]);
            let r = weight_const(rng, &[c, 2, 2]);
            let (xc, rc) = (x.clone(), r.clone());
            let xm = x.clone();
            Case {
                op: "maxpool2d",
                leaves: vec![("x".into(), x)],
                build: Box::new(move || weighted_sum(&xc.maxpool2d((2, 2), (2, 2))?, &rc)),
                margin: Box::new(move || {
                    let d = xm.data();
                    let c = xm.shape()[0];
                    let mut margin = f64::INFINITY;
                    for ci in 0..c {
                        for oh in 0..2 {
                            for ow in 0..2 {
                                let mut vals: Vec<f64> = Vec::with_capacity(4);
                                for i in 0..2 {
                                    for j in 0..2 {
                                        vals.push(d[(ci * 4 + oh * 2 + i) * 4 + ow * 2 + j]);
                                    }
                                }
                                vals.sort_by(|a, b| b.partial_cmp(a).expect("finite values"));
                                let gap = vals[0] - vals[1];
                                if gap < margin {
                                    margin = gap;
                                }
                            }
                        }
                    }
                    Ok(margin)
                }),
            }
        }
        6 => {
            let n = rng.random_range(2..=4);
            let d_in = rng.random_range(2..=5);
            let d_out = rng.random_range(1..=4);
            let x = param(rng, &[n, d_in]);
            let w = param(rng, &[d_out, d_in]);
            let b = param(rng, &[d_out]);
            let r = weight_const(rng, &[n, d_out]);
            let (xc, wc, bc, rc) = (x.clone(), w.clone(), b.clone(), r.clone());
            Case {
                op: "linear",
                leaves: vec![("x".into(), x), ("w".into(), w), ("b".into(), b)],
                build: Box::new(move || weighted_sum(&xc.linear(&wc, &bc)?, &rc)),
                margin: Box::new(|| Ok(f64::INFINITY)),
            }
        }
        7 => {
            let len = rng.random_range(4..=12);
            let x = param(rng, &[len]);
            let r = weight_const(rng, &[len]);
            let (xc, rc) = (x.clone(), r.clone());
            let xm = x.clone();
            Case {
                op: "relu",
                leaves: vec![("x".into(), x)],
                build: Box::new(move || weighted_sum(&xc.relu(), &rc)),
                margin: Box::new(move || Ok(min_abs(&xm))),
            }
        }
        8 => {
            let t_len = rng.random_range(3..=6);
            let a = param(rng, &[2, t_len]);
            let b = param(rng, &[3, t_len]);
            let r = weight_const(rng, &[5, t_len]);
            let (ac, bc, rc) = (a.clone(), b.clone(), r.clone());
            Case {
                op: "concat_channels",
                leaves: vec![("a".into(), a), ("b".into(), b)],
                build: Box::new(move || weighted_sum(&ac.concat_channels(&bc)?, &rc)),
                margin: Box::new(|| Ok(f64::INFINITY)),
            }
        }
        9 => {
            let n = rng.random_range(2..=4);
            let classes = rng.random_range(2..=4);
            let logits = param(rng, &[n, classes]);
            let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..classes)).collect();
            let lc = logits.clone();
            Case {
                op: "softmax_cross_entropy",
                leaves: vec![("logits".into(), logits)],
                build: Box::new(move || lc.softmax_cross_entropy(&labels)),
                margin: Box::new(|| Ok(f64::INFINITY)),
            }
        }
        10 => {
            // add + mul with a shared operand: checks fan-out accumulation.
            let len = rng.random_range(3..=8);
            let a = param(rng, &[len]);
            let b = param(rng, &[len]);
            let (ac, bc) = (a.clone(), b.clone());
            Case {
                op: "add_mul",
                leaves: vec![("a".into(), a), ("b".into(), b)],
                build: Box::new(move || Ok(ac.add(&bc)?.mul(&ac)?.sum())),
                margin: Box::new(|| Ok(f64::INFINITY)),
            }
        }
        11 => {
            // stack_columns consumed twice: once whole, once via a column.
            let c = rng.random_range(2..=4);
            let t_len = rng.random_range(2..=5);
            let parts: Vec<Tensor> = (0..t_len).map(|_| param(rng, &[c])).collect();
            let t_pick = rng.random_range(0..t_len);
            let r = weight_const(rng, &[c, t_len]);
            let r2 = weight_const(rng, &[c]);
            let pc = parts.clone();
            let (rc, r2c) = (r.clone(), r2.clone());
            Case {
                op: "stack_columns_select",
                leaves: parts
                    .iter()
                    .enumerate()
                    .map(|(i, p)| (format!("part{i}"), p.clone()))
                    .collect(),
                build: Box::new(move || {
                    let s = stack_columns(&pc)?;
                    let whole = weighted_sum(&s, &rc)?;
                    let col = weighted_sum(&s.select_column(t_pick)?, &r2c)?;
                    whole.add(&col)
                }),
                margin: Box::new(|| Ok(f64::INFINITY)),
            }
        }
        12 => {
            let n = rng.random_range(2..=4);
            let d = rng.random_range(2..=4);
            let parts: Vec<Tensor> = (0..n).map(|_| param(rng, &[d])).collect();
            let r = weight_const(rng, &[n * d]);
            let pc = parts.clone();
            let rc = r.clone();
            Case {
                op: "stack_rows_reshape",
                leaves: parts
                    .iter()
                    .enumerate()
                    .map(|(i, p)| (format!("part{i}"), p.clone()))
                    .collect(),
                build: Box::new(move || {
                    let m = stack_rows(&pc)?;
                    weighted_sum(&m.reshape(&[m.numel()])?, &rc)
                }),
                margin: Box::new(|| Ok(f64::INFINITY)),
            }
        }
        13 => {
            let c = rng.random_range(1..=4);
            let t_len = rng.random_range(2..=8);
            let x = param(rng, &[c, t_len]);
            let r = weight_const(rng, &[c]);
            let (xc, rc) = (x.clone(), r.clone());
            Case {
                op: "mean_columns",
                leaves: vec![("x".into(), x)],
                build: Box::new(move || weighted_sum(&xc.mean_columns()?, &rc)),
                margin: Box::new(|| Ok(f64::INFINITY)),
            }
        }
        _ => {
            // Full MS-TCN layer: branch convs + concat + relu.
            let c_in = rng.random_range(1..=3);
            let c_out = 4;
            let t_len = rng.random_range(5..=8);
            let cfg = MsTcnLayerConfig {
                in_channels: c_in,
                out_channels: c_out,
                kernels: vec![2, 3],
                dilations: vec![1, 2],
            };
            let widths = cfg.branch_channels();
            let x = param(rng, &[c_in, t_len]);
            let mut leaves = vec![("x".to_string(), x.clone())];
            let mut branches = Vec::new();
            for (j, &c_j) in widths.iter().enumerate() {
                let w = param(rng, &[c_j, c_in, cfg.kernels[j]]);
                let b = param(rng, &[c_j]);
                leaves.push((format!("branch{j}.weight"), w.clone()));
                leaves.push((format!("branch{j}.bias"), b.clone()));
                branches.push(crate::tcn::BranchWeights { weight: w, bias: b });
            }
            let weights = MsTcnLayerWeights { branches };
            let r = weight_const(rng, &[c_out, t_len]);
            let (xc, cfgc, rc, wts) = (x.clone(), cfg.clone(), r.clone(), weights.clone());
            let (xm, cfgm, wm) = (x, cfg, weights);
            Case {
                op: "mstcn_layer",
                leaves,
                build: Box::new(move || {
                    weighted_sum(
                        &mstcn_layer_forward(&xc, &cfgc, &wts, crate::tcn::Activation::Relu)?,
                        &rc,
                    )
                }),
                margin: Box::new(move || {
                    let pre = crate::tcn::mstcn_layer_preactivation(&xm, &cfgm, &wm)?;
                    Ok(min_abs(&pre))
                }),
            }
        }
    }
}

pub const CASE_KINDS: usize = 15;

/// Runs `cases` randomized checks, cycling through all case kinds.
pub fn run_gradcheck<R: Rng + ?Sized>(rng: &mut R, cases: usize) -> Result<GradCheckOutcome> {
    let mut outcome = GradCheckOutcome {
        cases_run: 0,
        elements_checked: 0,
        max_rel_err: 0.0,
        per_op: Vec::new(),
        failures: Vec::new(),
    };
    for case_index in 0..cases {
        let kind = case_index % CASE_KINDS;
        let mut case = make_case(kind, rng);
        let mut tries = 0;
        while (case.margin)()? <= KINK_MARGIN {
            tries += 1;
            assert!(
                tries <= MAX_RESAMPLES,
                "could not sample a kink-free case for {}",
                case.op
            );
            case = make_case(kind, rng);
        }
        let loss = (case.build)()?;
        loss.backward()?;
        let mut case_max = 0.0f64;
        for (leaf_name, leaf) in &case.leaves {
            let analytic = leaf
                .grad()
                .unwrap_or_else(|| panic!("leaf {leaf_name} of {} got no gradient", case.op));
            for i in 0..leaf.numel() {
                let original = leaf.data()[i];
                leaf.data_mut()[i] = original + FD_STEP;
                let f_plus = (case.build)()?.item();
                leaf.data_mut()[i] = original - FD_STEP;
                let f_minus = (case.build)()?.item();
                leaf.data_mut()[i] = original;
                let numeric = (f_plus - f_minus) / (2.0 * FD_STEP);
                let a = analytic[i];
                let denom = a.abs().max(numeric.abs()).max(1e-4);
                let rel = (a - numeric).abs() / denom;
                outcome.elements_checked += 1;
                if rel > case_max {
                    case_max = rel;
                }
                if rel >= REL_TOL {
                    outcome.failures.push(GradCheckFailure {
                        case: case_index,
                        op: case.op.into(),
                        leaf: leaf_name.clone(),
                        index: i,
                        analytic: a,
                        numeric,
                        rel_err: rel,
                    });
                }
            }
        }
        if case_max > outcome.max_rel_err {
            outcome.max_rel_err = case_max;
        }
        match outcome.per_op.iter_mut().find(|s| s.op == case.op) {
            Some(stat) => {
                stat.cases += 1;
                if case_max > stat.max_rel_err {
                    stat.max_rel_err = case_max;
                }
            }
            None => outcome.per_op.push(OpStat {
                op: case.op.into(),
                cases: 1,
                max_rel_err: case_max,
            }),
        }
        outcome.cases_run += 1;
    }
    Ok(outcome)
}
