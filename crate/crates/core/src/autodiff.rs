//! Reverse-mode automatic differentiation over [`Tensor`] values.
//!
//! A [`Tape`] records every operation as a node holding its output value,
//! its inputs and whatever intermediates its backward rule needs.
//! [`Tape::backward`] walks the nodes in reverse recording order and
//! returns gradients for every leaf that requires them. The tape is
//! consumed by a backward pass; build a new tape per step.

use crate::error::{Error, Result};
use crate::ops::activation::{gelu, gelu_grad};
use crate::ops::conv::{self, Conv2dOpts};
use crate::ops::loss::{abs_diff_sign, cross_entropy_forward, l1_forward, softmax_rows};
use crate::ops::norm::{layer_norm_backward, layer_norm_forward, LayerNormCache};
use crate::ops::spatial;
use crate::tensor::{ComplexTensor, Tensor};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Sum(Var),
    Mean(Var),
    Reshape(Var),
    Permute(Var, Vec<usize>),
    Narrow {
        x: Var,
        axis: usize,
        start: usize,
    },
    Concat {
        parts: Vec<Var>,
        axis: usize,
    },
    Conv2d {
        x: Var,
        w: Var,
        b: Option<Var>,
        opts: Conv2dOpts,
    },
    Conv1d {
        x: Var,
        w: Var,
        b: Option<Var>,
        dilation: usize,
        causal: bool,
    },
    Linear {
        x: Var,
        w: Var,
        b: Option<Var>,
    },
    AdaptiveMaxPool {
        x: Var,
        argmax: Vec<usize>,
    },
    Nearest(Var),
    PixelShuffle {
        x: Var,
        ds: usize,
        df: usize,
    },
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        axis: usize,
        cache: LayerNormCache,
    },
    Gelu(Var),
    SpatialMean(Var),
    ComplexDft {
        x: Var,
        axis: usize,
    },
    ComplexAbs {
        x: Var,
    },
    L1 {
        a: Var,
        b: Var,
    },
    CrossEntropy {
        logits: Var,
        probs: Vec<f64>,
        labels: Vec<usize>,
    },
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    consumed: bool,
}

/// Gradients produced by [`Tape::backward`], indexed by leaf [`Var`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

fn expect_rank(op: &'static str, t: &Tensor, rank: usize) -> Result<()> {
    if t.rank() != rank {
        return Err(Error::Rank {
            op,
            expected: rank,
            got: t.shape().to_vec(),
        });
    }
    Ok(())
}

fn expect_dim(op: &'static str, t: &Tensor, axis: usize, expected: usize) -> Result<()> {
    if t.dim(axis) != expected {
        return Err(Error::Dimension {
            op,
            axis,
            expected,
            got: t.dim(axis),
        });
    }
    Ok(())
}

fn expect_same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.rank() != b.rank() {
        return Err(Error::Rank {
            op,
            expected: a.rank(),
            got: b.shape().to_vec(),
        });
    }
    for axis in 0..a.rank() {
        expect_dim(op, b, axis, a.dim(axis))?;
    }
    Ok(())
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Tensor, op: Op, inputs: &[Var]) -> Var {
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        if cfg!(debug_assertions) && !value.all_finite() {
            let finite_inputs = inputs.iter().all(|v| self.nodes[v.0].value.all_finite());
            assert!(!finite_inputs, "non-finite output from finite inputs");
        }
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Registers an input tensor. Leaves with `requires_grad` receive a
    /// gradient on backward.
    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn param(&mut self, value: Tensor) -> Var {
        self.leaf(value, true)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    fn binary(&mut self, op_name: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        let (ta, tb) = (self.value(a), self.value(b));
        expect_same_shape(op_name, ta, tb)?;
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        Tensor::new(ta.shape().to_vec(), data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.binary("add", a, b, |x, y| x + y)?;
        Ok(self.push(t, Op::Add(a, b), &[a, b]))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.binary("sub", a, b, |x, y| x - y)?;
        Ok(self.push(t, Op::Sub(a, b), &[a, b]))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.binary("mul", a, b, |x, y| x * y)?;
        Ok(self.push(t, Op::Mul(a, b), &[a, b]))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let t = self.value(a).map(|v| v * s);
        self.push(t, Op::Scale(a, s), &[a])
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let t = Tensor::scalar(self.value(a).data().iter().sum());
        self.push(t, Op::Sum(a), &[a])
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let t = Tensor::scalar(x.data().iter().sum::<f64>() / x.numel() as f64);
        self.push(t, Op::Mean(a), &[a])
    }

    pub fn reshape(&mut self, a: Var, shape: impl Into<Vec<usize>>) -> Result<Var> {
        let t = self.value(a).clone().reshape(shape)?;
        Ok(self.push(t, Op::Reshape(a), &[a]))
    }

    pub fn permute(&mut self, a: Var, perm: &[usize]) -> Result<Var> {
        let t = self.value(a).permute(perm)?;
        Ok(self.push(t, Op::Permute(a, perm.to_vec()), &[a]))
    }

    pub fn narrow(&mut self, a: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let t = self.value(a).narrow(axis, start, len)?;
        Ok(self.push(t, Op::Narrow { x: a, axis, start }, &[a]))
    }

    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let values: Vec<&Tensor> = parts.iter().map(|&v| self.value(v)).collect();
        let t = Tensor::concat(&values, axis)?;
        Ok(self.push(
            t,
            Op::Concat {
                parts: parts.to_vec(),
                axis,
            },
            parts,
        ))
    }

    /// Splits the channel axis (axis 1) into `k` equal contiguous groups.
    pub fn split_channels(&mut self, x: Var, k: usize) -> Result<Vec<Var>> {
        let t = self.value(x);
        if t.rank() < 2 {
            return Err(Error::Rank {
                op: "split_channels",
                expected: 2,
                got: t.shape().to_vec(),
            });
        }
        let c = t.dim(1);
        if k == 0 || !c.is_multiple_of(k) {
            return Err(Error::arg(format!("cannot split {c} channels into {k} groups")));
        }
        let size = c / k;
        (0..k).map(|g| self.narrow(x, 1, g * size, size)).collect()
    }

    pub fn concat_channels(&mut self, parts: &[Var]) -> Result<Var> {
        self.concat(parts, 1)
    }

    /// 2-D cross-correlation of `x: [N, C_in, H, W]` with
    /// `w: [C_out, C_in / groups, kh, kw]`, zero padding.
    pub fn conv2d(&mut self, x: Var, w: Var, b: Option<Var>, opts: Conv2dOpts) -> Result<Var> {
        let (tx, tw) = (self.value(x), self.value(w));
        expect_rank("conv2d", tx, 4)?;
        expect_rank("conv2d", tw, 4)?;
        if opts.groups == 0 || opts.stride == 0 {
            return Err(Error::arg("conv2d groups and stride must be positive"));
        }
        let (cin, cout) = (tx.dim(1), tw.dim(0));
        if cin % opts.groups != 0 || cout % opts.groups != 0 {
            return Err(Error::arg(format!(
                "conv2d: channels in={cin} out={cout} not divisible by groups={}",
                opts.groups
            )));
        }
        expect_dim("conv2d", tw, 1, cin / opts.groups)?;
        for (axis, k) in [(2, tw.dim(2)), (3, tw.dim(3))] {
            if conv::conv2d_out_dim(tx.dim(axis), k, opts).is_none() {
                return Err(Error::Dimension {
                    op: "conv2d",
                    axis,
                    expected: k,
                    got: tx.dim(axis) + 2 * opts.padding,
                });
            }
        }
        if let Some(b) = b {
            let tb = self.value(b);
            expect_rank("conv2d bias", tb, 1)?;
            expect_dim("conv2d bias", tb, 0, cout)?;
        }
        let out = conv::conv2d_forward(tx, tw, b.map(|b| self.value(b)), opts);
        let inputs: Vec<Var> = [Some(x), Some(w), b].into_iter().flatten().collect();
        Ok(self.push(out, Op::Conv2d { x, w, b, opts }, &inputs))
    }

    /// Dilated 1-D cross-correlation of `x: [N, C_in, T]` with `w: [C_out, C_in, k]`.
    pub fn dilated_conv1d(&mut self, x: Var, w: Var, b: Option<Var>, dilation: usize, causal: bool) -> Result<Var> {
        let (tx, tw) = (self.value(x), self.value(w));
        expect_rank("dilated_conv1d", tx, 3)?;
        expect_rank("dilated_conv1d", tw, 3)?;
        expect_dim("dilated_conv1d", tw, 1, tx.dim(1))?;
        if dilation == 0 {
            return Err(Error::arg("dilation must be >= 1"));
        }
        let reach = (tw.dim(2) - 1) * dilation;
        let padded = tx.dim(2) + if causal { reach } else { 0 };
        if reach + 1 > padded {
            return Err(Error::arg(format!(
                "dilated kernel spans {} samples but padded input has {padded}",
                reach + 1
            )));
        }
        if let Some(b) = b {
            expect_dim("dilated_conv1d bias", self.value(b), 0, tw.dim(0))?;
        }
        let out = conv::conv1d_forward(tx, tw, b.map(|b| self.value(b)), dilation, causal);
        let inputs: Vec<Var> = [Some(x), Some(w), b].into_iter().flatten().collect();
        Ok(self.push(
            out,
            Op::Conv1d {
                x,
                w,
                b,
                dilation,
                causal,
            },
            &inputs,
        ))
    }

    /// `x: [N, in]`, `w: [out, in]`, `b: [out]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let (tx, tw) = (self.value(x), self.value(w));
        expect_rank("linear", tx, 2)?;
        expect_rank("linear", tw, 2)?;
        expect_dim("linear", tw, 1, tx.dim(1))?;
        if let Some(b) = b {
            expect_dim("linear bias", self.value(b), 0, tw.dim(0))?;
        }
        let out = conv::linear_forward(tx, tw, b.map(|b| self.value(b)));
        let inputs: Vec<Var> = [Some(x), Some(w), b].into_iter().flatten().collect();
        Ok(self.push(out, Op::Linear { x, w, b }, &inputs))
    }

    pub fn adaptive_max_pool2d(&mut self, x: Var, out_h: usize, out_w: usize) -> Result<Var> {
        let tx = self.value(x);
        expect_rank("adaptive_max_pool2d", tx, 4)?;
        if out_h == 0 || out_w == 0 {
            return Err(Error::arg("adaptive_max_pool2d output dims must be positive"));
        }
        if out_h > tx.dim(2) || out_w > tx.dim(3) {
            return Err(Error::arg(format!(
                "adaptive_max_pool2d output ({out_h}, {out_w}) exceeds input ({}, {})",
                tx.dim(2),
                tx.dim(3)
            )));
        }
        let (out, argmax) = spatial::adaptive_max_pool2d_forward(tx, out_h, out_w);
        Ok(self.push(out, Op::AdaptiveMaxPool { x, argmax }, &[x]))
    }

    pub fn interpolate_nearest(&mut self, x: Var, out_h: usize, out_w: usize) -> Result<Var> {
        let tx = self.value(x);
        expect_rank("interpolate_nearest", tx, 4)?;
        if out_h == 0 || out_w == 0 {
            return Err(Error::arg("interpolate_nearest output dims must be positive"));
        }
        let out = spatial::nearest_forward(tx, out_h, out_w);
        Ok(self.push(out, Op::Nearest(x), &[x]))
    }

    pub fn pixel_shuffle(&mut self, x: Var, ds: usize, df: usize) -> Result<Var> {
        let tx = self.value(x);
        expect_rank("pixel_shuffle", tx, 4)?;
        if ds == 0 || df == 0 || !tx.dim(1).is_multiple_of(ds * df) {
            return Err(Error::arg(format!(
                "pixel_shuffle: {} channels not divisible by {ds}x{df}",
                tx.dim(1)
            )));
        }
        let out = spatial::pixel_shuffle_forward(tx, ds, df);
        Ok(self.push(out, Op::PixelShuffle { x, ds, df }, &[x]))
    }

    /// Layer normalization over `axis` (the channel axis for `[N, C, H, W]`
    /// is 1), with per-channel affine `gamma`, `beta`.
    pub fn layer_norm(&mut self, x: Var, axis: usize, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        if eps <= 0.0 || !eps.is_finite() {
            return Err(Error::arg(format!("layer_norm eps must be positive, got {eps}")));
        }
        let tx = self.value(x);
        if axis >= tx.rank() {
            return Err(Error::arg(format!("layer_norm axis {axis} out of range")));
        }
        let c = tx.dim(axis);
        for v in [gamma, beta] {
            let t = self.value(v);
            expect_rank("layer_norm affine", t, 1)?;
            expect_dim("layer_norm affine", t, 0, c)?;
        }
        let (out, cache) = layer_norm_forward(tx, axis, self.value(gamma), self.value(beta), eps);
        Ok(self.push(
            out,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                axis,
                cache,
            },
            &[x, gamma, beta],
        ))
    }

    pub fn gelu(&mut self, x: Var) -> Var {
        let out = self.value(x).map(gelu);
        self.push(out, Op::Gelu(x), &[x])
    }

    /// `[N, C, H, W] -> [N, C]`.
    pub fn spatial_mean(&mut self, x: Var) -> Result<Var> {
        expect_rank("spatial_mean", self.value(x), 4)?;
        let out = spatial::spatial_mean_forward(self.value(x));
        Ok(self.push(out, Op::SpatialMean(x), &[x]))
    }

    /// Unnormalized DFT of the complex signal packed in channels 0 (re) and
    /// 1 (im) of `x: [N, 2, H, W]`, along spatial `axis` (2 or 3).
    pub fn complex_dft(&mut self, x: Var, axis: usize) -> Result<Var> {
        let tx = self.value(x);
        expect_rank("complex_dft", tx, 4)?;
        expect_dim("complex_dft", tx, 1, 2)?;
        if axis != 2 && axis != 3 {
            return Err(Error::arg(format!("complex_dft axis must be 2 or 3, got {axis}")));
        }
        let out = packed_transform(tx, axis, false);
        Ok(self.push(out, Op::ComplexDft { x, axis }, &[x]))
    }

    /// `[N, 2, H, W] -> [N, 1, H, W]` magnitude `sqrt(re^2 + im^2 + EPS)`.
    pub fn complex_abs(&mut self, x: Var) -> Result<Var> {
        let tx = self.value(x);
        expect_rank("complex_abs", tx, 4)?;
        expect_dim("complex_abs", tx, 1, 2)?;
        let (n, h, w) = (tx.dim(0), tx.dim(2), tx.dim(3));
        let plane = h * w;
        let mut out = Vec::with_capacity(n * plane);
        for b in 0..n {
            let re = &tx.data()[b * 2 * plane..][..plane];
            let im = &tx.data()[(b * 2 + 1) * plane..][..plane];
            out.extend(re.iter().zip(im).map(|(r, i)| (r * r + i * i + MAGNITUDE_EPS).sqrt()));
        }
        let out = Tensor::new(vec![n, 1, h, w], out)?;
        Ok(self.push(out, Op::ComplexAbs { x }, &[x]))
    }

    /// Mean absolute error between `a` and `b`.
    pub fn l1_loss(&mut self, a: Var, b: Var) -> Result<Var> {
        expect_same_shape("l1_loss", self.value(a), self.value(b))?;
        let out = Tensor::scalar(l1_forward(self.value(a), self.value(b)));
        Ok(self.push(out, Op::L1 { a, b }, &[a, b]))
    }

    /// Batch-mean cross entropy of `[N, C]` logits against class labels.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let t = self.value(logits);
        expect_rank("cross_entropy", t, 2)?;
        expect_dim("cross_entropy", t, 0, labels.len())?;
        let c = t.dim(1);
        if let Some(&bad) = labels.iter().find(|&&y| y >= c) {
            return Err(Error::arg(format!("label {bad} out of range for {c} classes")));
        }
        let out = Tensor::scalar(cross_entropy_forward(t, labels));
        let probs = softmax_rows(t);
        Ok(self.push(
            out,
            Op::CrossEntropy {
                logits,
                probs,
                labels: labels.to_vec(),
            },
            &[logits],
        ))
    }

    /// Computes `d loss / d leaf` for every leaf that requires grad and is
    /// reachable from `loss`. Consumes the tape.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients> {
        if self.consumed {
            return Err(Error::State("backward called on a consumed tape".into()));
        }
        if self.value(loss).numel() != 1 {
            return Err(Error::arg(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        self.consumed = true;
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::full(self.value(loss).shape().to_vec(), 1.0));
        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(idx, &g, &mut grads);
        }
        // Only leaf gradients survive; intermediates were taken above.
        Ok(Gradients { grads })
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn propagate(&self, idx: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let mut acc = |v: Var, t: Tensor| {
            if !self.nodes[v.0].requires_grad {
                return;
            }
            match &mut grads[v.0] {
                Some(existing) => {
                    for (e, x) in existing.data_mut().iter_mut().zip(t.data()) {
                        *e += x;
                    }
                }
                slot @ None => *slot = Some(t),
            }
        };
        let node = &self.nodes[idx];
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::Sub(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.map(|v| -v));
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                if self.needs(*a) {
                    acc(*a, zip_map(g, tb, |gv, y| gv * y));
                }
                if self.needs(*b) {
                    acc(*b, zip_map(g, ta, |gv, x| gv * x));
                }
            }
            Op::Scale(a, s) => acc(*a, g.map(|v| v * s)),
            Op::Sum(a) => {
                let shape = self.value(*a).shape().to_vec();
                acc(*a, Tensor::full(shape, g.item()));
            }
            Op::Mean(a) => {
                let x = self.value(*a);
                acc(*a, Tensor::full(x.shape().to_vec(), g.item() / x.numel() as f64));
            }
            Op::Reshape(a) => {
                let shape = self.value(*a).shape().to_vec();
                acc(*a, g.clone().reshape(shape).expect("same numel"));
            }
            Op::Permute(a, perm) => {
                let mut inverse = vec![0; perm.len()];
                for (i, &p) in perm.iter().enumerate() {
                    inverse[p] = i;
                }
                acc(*a, g.permute(&inverse).expect("valid permutation"));
            }
            Op::Narrow { x, axis, start } => {
                let shape = self.value(*x).shape().to_vec();
                let (outer, inner) = crate::tensor::outer_inner(&shape, *axis);
                let (extent, len) = (shape[*axis], g.dim(*axis));
                let mut gx = Tensor::zeros(shape);
                let gd = gx.data_mut();
                for o in 0..outer {
                    let dst = (o * extent + start) * inner;
                    gd[dst..dst + len * inner].copy_from_slice(&g.data()[o * len * inner..(o + 1) * len * inner]);
                }
                acc(*x, gx);
            }
            Op::Concat { parts, axis } => {
                let mut start = 0;
                for &p in parts {
                    let len = self.value(p).dim(*axis);
                    if self.needs(p) {
                        acc(p, g.narrow(*axis, start, len).expect("in bounds"));
                    }
                    start += len;
                }
            }
            Op::Conv2d { x, w, b, opts } => {
                let (gx, gw, gb) = conv::conv2d_backward(
                    self.value(*x),
                    self.value(*w),
                    g,
                    *opts,
                    self.needs(*x),
                    self.needs(*w),
                    b.is_some_and(|b| self.needs(b)),
                );
                if let Some(t) = gx {
                    acc(*x, t);
                }
                if let Some(t) = gw {
                    acc(*w, t);
                }
                if let (Some(b), Some(t)) = (b, gb) {
                    acc(*b, t);
                }
            }
            Op::Conv1d {
                x,
                w,
                b,
                dilation,
                causal,
            } => {
                let (gx, gw, gb) = conv::conv1d_backward(self.value(*x), self.value(*w), g, *dilation, *causal);
                acc(*x, gx);
                acc(*w, gw);
                if let Some(b) = b {
                    acc(*b, gb);
                }
            }
            Op::Linear { x, w, b } => {
                let (gx, gw, gb) = conv::linear_backward(self.value(*x), self.value(*w), g);
                acc(*x, gx);
                acc(*w, gw);
                if let Some(b) = b {
                    acc(*b, gb);
                }
            }
            Op::AdaptiveMaxPool { x, argmax } => {
                acc(*x, spatial::scatter_argmax(self.value(*x).shape(), argmax, g));
            }
            Op::Nearest(x) => acc(*x, spatial::nearest_backward(self.value(*x).shape(), g)),
            Op::PixelShuffle { x, ds, df } => {
                acc(
                    *x,
                    crate::tensor::pixel_unshuffle(g, *ds, *df).expect("shape from forward"),
                );
            }
            Op::LayerNorm {
                x,
                gamma,
                beta,
                axis,
                cache,
            } => {
                let (gx, gg, gb) = layer_norm_backward(self.value(*x).shape(), *axis, self.value(*gamma), cache, g);
                acc(*x, gx);
                acc(*gamma, gg);
                acc(*beta, gb);
            }
            Op::Gelu(x) => acc(*x, zip_map(g, self.value(*x), |gv, xv| gv * gelu_grad(xv))),
            Op::SpatialMean(x) => {
                let shape = self.value(*x).shape().to_vec();
                let plane: usize = shape[2..].iter().product();
                let mut gx = Tensor::zeros(shape);
                for (chunk, &gv) in gx.data_mut().chunks_mut(plane).zip(g.data()) {
                    chunk.fill(gv / plane as f64);
                }
                acc(*x, gx);
            }
            Op::ComplexDft { x, axis } => {
                // The adjoint of the unnormalized DFT is the unnormalized
                // inverse DFT applied to the output gradient.
                acc(*x, packed_transform(g, *axis, true));
            }
            Op::ComplexAbs { x } => {
                let tx = self.value(*x);
                let y = &node.value;
                let (n, plane) = (tx.dim(0), tx.dim(2) * tx.dim(3));
                let mut gx = Tensor::zeros(tx.shape().to_vec());
                let gd = gx.data_mut();
                for b in 0..n {
                    for k in 0..plane {
                        let yi = b * plane + k;
                        let scale = g.data()[yi] / y.data()[yi];
                        let re = b * 2 * plane + k;
                        let im = re + plane;
                        gd[re] = scale * tx.data()[re];
                        gd[im] = scale * tx.data()[im];
                    }
                }
                acc(*x, gx);
            }
            Op::L1 { a, b } => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let s = g.item() / ta.numel() as f64;
                let ga = zip_map(ta, tb, |x, y| s * abs_diff_sign(x, y));
                if self.needs(*b) {
                    acc(*b, ga.map(|v| -v));
                }
                acc(*a, ga);
            }
            Op::CrossEntropy { logits, probs, labels } => {
                let c = self.value(*logits).dim(1);
                let s = g.item() / labels.len() as f64;
                let mut gl = probs.clone();
                for (i, &y) in labels.iter().enumerate() {
                    gl[i * c + y] -= 1.0;
                }
                gl.iter_mut().for_each(|v| *v *= s);
                acc(
                    *logits,
                    Tensor::new(self.value(*logits).shape().to_vec(), gl).expect("shape"),
                );
            }
        }
    }
}

/// Smoothing term inside the magnitude square root, keeping its gradient
/// finite at zero.
pub const MAGNITUDE_EPS: f64 = 1e-12;

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::new(a.shape().to_vec(), data).expect("same shape")
}

/// DFT along `axis` of `[N, 2, H, W]` with re/im packed on axis 1.
fn packed_transform(x: &Tensor, axis: usize, inverse: bool) -> Tensor {
    let (n, h, w) = (x.dim(0), x.dim(2), x.dim(3));
    let plane = h * w;
    let mut re = Vec::with_capacity(n * plane);
    let mut im = Vec::with_capacity(n * plane);
    for b in 0..n {
        re.extend_from_slice(&x.data()[b * 2 * plane..][..plane]);
        im.extend_from_slice(&x.data()[(b * 2 + 1) * plane..][..plane]);
    }
    let c = ComplexTensor::new(vec![n, h, w], re, im).expect("shape");
    // Complex tensor drops the packed channel axis, shifting spatial axes down.
    let y = if inverse {
        c.ifft_1d_unnormalized(axis - 1)
    } else {
        c.fft_1d(axis - 1)
    }
    .expect("axis validated");
    let mut out = Vec::with_capacity(x.numel());
    for b in 0..n {
        out.extend_from_slice(&y.re()[b * plane..][..plane]);
        out.extend_from_slice(&y.im()[b * plane..][..plane]);
    }
    Tensor::new(x.shape().to_vec(), out).expect("shape")
}
