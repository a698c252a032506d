use std::sync::atomic::{AtomicU64, Ordering};

use crate::tensor::{permute_data, split_at_axis};
use crate::{Result, Tensor, TensorError};

static NEXT_TAPE_ID: AtomicU64 = AtomicU64::new(1);

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var {
    tape: u64,
    index: usize,
}

#[derive(Debug)]
enum Op {
    Leaf,
    Add(usize, usize, Broadcast),
    Sub(usize, usize, Broadcast),
    Mul(usize, usize, Broadcast),
    Scale(usize, f64),
    AddScalar(usize),
    Relu(usize),
    Gelu(usize),
    Abs(usize),
    MatMul(usize, usize, MatMulLayout),
    Permute(usize, Vec<usize>),
    Reshape(usize),
    Concat(Vec<usize>, usize),
    Slice {
        input: usize,
        axis: usize,
        start: usize,
    },
    Sum(usize),
    Mean(usize),
    Softmax(usize, usize),
    LayerNorm {
        x: usize,
        gamma: usize,
        beta: usize,
        normalized: Vec<f64>,
        inv_std: Vec<f64>,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Which operand, if any, is repeated over the leading axes of the other.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Broadcast {
    Same,
    RhsRepeated,
    LhsRepeated,
}

#[derive(Clone, Copy, Debug)]
struct MatMulLayout {
    batch: usize,
    m: usize,
    k: usize,
    n: usize,
    lhs_batched: bool,
    rhs_batched: bool,
}

/// Append-only record of a forward computation.
///
/// Single-threaded by construction; build one tape per thread.
#[derive(Debug)]
pub struct Tape {
    id: u64,
    nodes: Vec<Node>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Differentiable leaf.
    pub fn param(&mut self, value: Tensor) -> Result<Var> {
        self.leaf(value, true)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Result<Var> {
        self.leaf(value, false)
    }

    fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Result<Var> {
        if !value.is_finite() {
            return Err(TensorError::NonFinite { op: "leaf" });
        }
        Ok(self.push_unchecked(value, Op::Leaf, requires_grad))
    }

    pub fn value(&self, v: Var) -> &Tensor {
        assert_eq!(v.tape, self.id, "variable belongs to a different tape");
        &self.nodes[v.index].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.index].requires_grad
    }

    fn idx(&self, v: Var) -> Result<usize> {
        if v.tape != self.id {
            return Err(TensorError::ForeignVar);
        }
        Ok(v.index)
    }

    fn push_unchecked(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var {
            tape: self.id,
            index: self.nodes.len() - 1,
        }
    }

    fn push(&mut self, name: &'static str, value: Tensor, op: Op, inputs: &[usize]) -> Result<Var> {
        if !value.is_finite() {
            return Err(TensorError::NonFinite { op: name });
        }
        let requires_grad = inputs.iter().any(|&i| self.nodes[i].requires_grad);
        Ok(self.push_unchecked(value, op, requires_grad))
    }

    fn shape(&self, i: usize) -> &[usize] {
        self.nodes[i].value.shape()
    }

    fn data(&self, i: usize) -> &[f64] {
        self.nodes[i].value.data()
    }

    fn broadcast(&self, op: &'static str, a: usize, b: usize) -> Result<Broadcast> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa == sb {
            Ok(Broadcast::Same)
        } else if sa.ends_with(sb) {
            Ok(Broadcast::RhsRepeated)
        } else if sb.ends_with(sa) {
            Ok(Broadcast::LhsRepeated)
        } else {
            Err(TensorError::ShapeMismatch {
                op,
                lhs: sa.to_vec(),
                rhs: sb.to_vec(),
            })
        }
    }

    fn binary(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        make: impl FnOnce(usize, usize, Broadcast) -> Op,
    ) -> Result<Var> {
        let (ia, ib) = (self.idx(a)?, self.idx(b)?);
        let bc = self.broadcast(name, ia, ib)?;
        let (da, db) = (self.data(ia), self.data(ib));
        let (shape, data): (Vec<usize>, Vec<f64>) = match bc {
            Broadcast::Same => (
                self.shape(ia).to_vec(),
                da.iter().zip(db).map(|(&x, &y)| f(x, y)).collect(),
            ),
            Broadcast::RhsRepeated => (
                self.shape(ia).to_vec(),
                da.iter()
                    .enumerate()
                    .map(|(i, &x)| f(x, db[i % db.len()]))
                    .collect(),
            ),
            Broadcast::LhsRepeated => (
                self.shape(ib).to_vec(),
                db.iter()
                    .enumerate()
                    .map(|(i, &y)| f(da[i % da.len()], y))
                    .collect(),
            ),
        };
        let value = Tensor::new(shape, data)?;
        self.push(name, value, make(ia, ib, bc), &[ia, ib])
    }

    /// Elementwise sum; one operand may be repeated over the other's leading axes.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("add", a, b, |x, y| x + y, Op::Add)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("sub", a, b, |x, y| x - y, Op::Sub)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("mul", a, b, |x, y| x * y, Op::Mul)
    }

    fn unary(
        &mut self,
        name: &'static str,
        a: Var,
        f: impl Fn(f64) -> f64,
        op: impl FnOnce(usize) -> Op,
    ) -> Result<Var> {
        let ia = self.idx(a)?;
        let src = &self.nodes[ia].value;
        let value = Tensor::new(src.shape().to_vec(), src.data().iter().map(|&x| f(x)).collect())?;
        self.push(name, value, op(ia), &[ia])
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Result<Var> {
        self.unary("scale", a, |x| x * factor, |i| Op::Scale(i, factor))
    }

    pub fn add_scalar(&mut self, a: Var, offset: f64) -> Result<Var> {
        self.unary("add_scalar", a, |x| x + offset, Op::AddScalar)
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.unary("relu", a, |x| x.max(0.0), Op::Relu)
    }

    /// Tanh approximation of GELU.
    pub fn gelu(&mut self, a: Var) -> Result<Var> {
        self.unary("gelu", a, gelu, Op::Gelu)
    }

    pub fn abs(&mut self, a: Var) -> Result<Var> {
        self.unary("abs", a, f64::abs, Op::Abs)
    }

    /// Batched matrix product `[.., m, k] x [.., k, n]`.
    ///
    /// Batch axes must match exactly, or one side must be a plain matrix that
    /// is applied to every batch entry of the other.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ia, ib) = (self.idx(a)?, self.idx(b)?);
        let (sa, sb) = (self.shape(ia).to_vec(), self.shape(ib).to_vec());
        let mismatch = || TensorError::ShapeMismatch {
            op: "matmul",
            lhs: sa.clone(),
            rhs: sb.clone(),
        };
        if sa.len() < 2 || sb.len() < 2 {
            return Err(mismatch());
        }
        let (m, k) = (sa[sa.len() - 2], sa[sa.len() - 1]);
        let (k2, n) = (sb[sb.len() - 2], sb[sb.len() - 1]);
        if k != k2 {
            return Err(mismatch());
        }
        let (ba, bb) = (&sa[..sa.len() - 2], &sb[..sb.len() - 2]);
        let (batch_shape, lhs_batched, rhs_batched) = if ba == bb {
            (ba.to_vec(), true, true)
        } else if bb.is_empty() {
            (ba.to_vec(), true, false)
        } else if ba.is_empty() {
            (bb.to_vec(), false, true)
        } else {
            return Err(mismatch());
        };
        let batch: usize = batch_shape.iter().product();
        let layout = MatMulLayout {
            batch,
            m,
            k,
            n,
            lhs_batched,
            rhs_batched,
        };
        let mut out = vec![0.0; batch * m * n];
        let (da, db) = (self.data(ia), self.data(ib));
        if lhs_batched && !rhs_batched {
            gemm(batch * m, k, n, da, k as isize, 1, db, n as isize, 1, 0.0, &mut out, n as isize, 1);
        } else {
            for bi in 0..batch {
                let a_off = if lhs_batched { bi * m * k } else { 0 };
                let b_off = if rhs_batched { bi * k * n } else { 0 };
                gemm(
                    m,
                    k,
                    n,
                    &da[a_off..a_off + m * k],
                    k as isize,
                    1,
                    &db[b_off..b_off + k * n],
                    n as isize,
                    1,
                    0.0,
                    &mut out[bi * m * n..(bi + 1) * m * n],
                    n as isize,
                    1,
                );
            }
        }
        let mut shape = batch_shape;
        shape.extend([m, n]);
        let value = Tensor::new(shape, out)?;
        self.push("matmul", value, Op::MatMul(ia, ib, layout), &[ia, ib])
    }

    pub fn permute(&mut self, a: Var, axes: &[usize]) -> Result<Var> {
        let ia = self.idx(a)?;
        let shape = self.shape(ia);
        let mut seen = vec![false; shape.len()];
        for &ax in axes {
            if ax >= shape.len() || seen[ax] {
                return Err(TensorError::InvalidAxis {
                    op: "permute",
                    axis: ax,
                    rank: shape.len(),
                });
            }
            seen[ax] = true;
        }
        if axes.len() != shape.len() {
            return Err(TensorError::Invalid {
                op: "permute",
                msg: format!("{} axes given for rank {}", axes.len(), shape.len()),
            });
        }
        let (data, out_shape) = permute_data(self.data(ia), shape, axes);
        let value = Tensor::new(out_shape, data)?;
        self.push("permute", value, Op::Permute(ia, axes.to_vec()), &[ia])
    }

    /// Swaps the last two axes.
    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let rank = self.value(a).rank();
        if rank < 2 {
            return Err(TensorError::InvalidAxis {
                op: "transpose",
                axis: 1,
                rank,
            });
        }
        let mut axes: Vec<usize> = (0..rank).collect();
        axes.swap(rank - 2, rank - 1);
        self.permute(a, &axes)
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let ia = self.idx(a)?;
        let value = self.nodes[ia].value.clone().reshaped(shape)?;
        self.push("reshape", value, Op::Reshape(ia), &[ia])
    }

    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let idxs = parts.iter().map(|&v| self.idx(v)).collect::<Result<Vec<_>>>()?;
        let Some(&first) = idxs.first() else {
            return Err(TensorError::Invalid {
                op: "concat",
                msg: "no inputs".into(),
            });
        };
        let base = self.shape(first).to_vec();
        if axis >= base.len() {
            return Err(TensorError::InvalidAxis {
                op: "concat",
                axis,
                rank: base.len(),
            });
        }
        let mut total = 0;
        for &i in &idxs {
            let s = self.shape(i);
            if s.len() != base.len() || s[..axis] != base[..axis] || s[axis + 1..] != base[axis + 1..] {
                return Err(TensorError::ShapeMismatch {
                    op: "concat",
                    lhs: base,
                    rhs: s.to_vec(),
                });
            }
            total += s[axis];
        }
        let (outer, _, inner) = split_at_axis(&base, axis);
        let mut data = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for &i in &idxs {
                let chunk = self.shape(i)[axis] * inner;
                data.extend_from_slice(&self.data(i)[o * chunk..(o + 1) * chunk]);
            }
        }
        let mut shape = base;
        shape[axis] = total;
        let value = Tensor::new(shape, data)?;
        self.push("concat", value, Op::Concat(idxs.clone(), axis), &idxs)
    }

    /// Half-open range `start..end` along `axis`.
    pub fn slice(&mut self, a: Var, axis: usize, start: usize, end: usize) -> Result<Var> {
        let ia = self.idx(a)?;
        let shape = self.shape(ia).to_vec();
        if axis >= shape.len() {
            return Err(TensorError::InvalidAxis {
                op: "slice",
                axis,
                rank: shape.len(),
            });
        }
        if start >= end || end > shape[axis] {
            return Err(TensorError::Invalid {
                op: "slice",
                msg: format!("range {start}..{end} invalid for extent {}", shape[axis]),
            });
        }
        let (outer, len, inner) = split_at_axis(&shape, axis);
        let src = self.data(ia);
        let mut data = Vec::with_capacity(outer * (end - start) * inner);
        for o in 0..outer {
            let base = o * len * inner;
            data.extend_from_slice(&src[base + start * inner..base + end * inner]);
        }
        let mut out_shape = shape;
        out_shape[axis] = end - start;
        let value = Tensor::new(out_shape, data)?;
        self.push("slice", value, Op::Slice { input: ia, axis, start }, &[ia])
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let ia = self.idx(a)?;
        let value = Tensor::scalar(self.data(ia).iter().sum());
        self.push("sum", value, Op::Sum(ia), &[ia])
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let ia = self.idx(a)?;
        let d = self.data(ia);
        let value = Tensor::scalar(d.iter().sum::<f64>() / d.len() as f64);
        self.push("mean", value, Op::Mean(ia), &[ia])
    }

    /// Max-subtracted softmax along `axis`.
    pub fn softmax(&mut self, a: Var, axis: usize) -> Result<Var> {
        let ia = self.idx(a)?;
        let shape = self.shape(ia).to_vec();
        if axis >= shape.len() {
            return Err(TensorError::InvalidAxis {
                op: "softmax",
                axis,
                rank: shape.len(),
            });
        }
        let (outer, len, inner) = split_at_axis(&shape, axis);
        let src = self.data(ia);
        let mut out = vec![0.0; src.len()];
        for o in 0..outer {
            for i in 0..inner {
                let at = |j: usize| o * len * inner + j * inner + i;
                let max = (0..len).map(|j| src[at(j)]).fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for j in 0..len {
                    let e = (src[at(j)] - max).exp();
                    out[at(j)] = e;
                    total += e;
                }
                for j in 0..len {
                    out[at(j)] /= total;
                }
            }
        }
        let value = Tensor::new(shape, out)?;
        self.push("softmax", value, Op::Softmax(ia, axis), &[ia])
    }

    /// Normalizes the last axis to zero mean and unit (population) variance,
    /// then applies `gamma * x + beta`.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        let (ix, ig, ib) = (self.idx(x)?, self.idx(gamma)?, self.idx(beta)?);
        let shape = self.shape(ix).to_vec();
        let Some(&width) = shape.last() else {
            return Err(TensorError::InvalidAxis {
                op: "layer_norm",
                axis: 0,
                rank: 0,
            });
        };
        for &p in &[ig, ib] {
            if self.shape(p) != [width] {
                return Err(TensorError::ShapeMismatch {
                    op: "layer_norm",
                    lhs: shape.clone(),
                    rhs: self.shape(p).to_vec(),
                });
            }
        }
        let (src, g, b) = (self.data(ix), self.data(ig), self.data(ib));
        let rows = src.len() / width;
        let mut normalized = vec![0.0; src.len()];
        let mut inv_std = vec![0.0; rows];
        let mut out = vec![0.0; src.len()];
        for r in 0..rows {
            let row = &src[r * width..(r + 1) * width];
            let mean = row.iter().sum::<f64>() / width as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / width as f64;
            let inv = 1.0 / (var + eps).sqrt();
            inv_std[r] = inv;
            for j in 0..width {
                let xh = (row[j] - mean) * inv;
                normalized[r * width + j] = xh;
                out[r * width + j] = xh * g[j] + b[j];
            }
        }
        let value = Tensor::new(shape, out)?;
        self.push(
            "layer_norm",
            value,
            Op::LayerNorm {
                x: ix,
                gamma: ig,
                beta: ib,
                normalized,
                inv_std,
            },
            &[ix, ig, ib],
        )
    }

    /// Reverse-mode accumulation from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let il = self.idx(loss)?;
        let loss_value = &self.nodes[il].value;
        if loss_value.numel() != 1 {
            return Err(TensorError::NonScalarLoss(loss_value.shape().to_vec()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[il] = Some(vec![1.0]);
        for i in (0..=il).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let g = match node.op {
                Op::Leaf => continue,
                _ => match grads[i].take() {
                    Some(g) => g,
                    None => continue,
                },
            };
            self.propagate(i, &g, &mut grads);
        }
        Ok(Gradients {
            tape: self.id,
            shapes: self.nodes.iter().map(|n| n.value.shape().to_vec()).collect(),
            grads,
        })
    }

    fn propagate(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let wants = |j: usize| self.nodes[j].requires_grad;
        let out = self.nodes[i].value.data();
        match &self.nodes[i].op {
            Op::Leaf => {}
            &Op::Add(a, b, bc) => {
                self.accumulate_broadcast(a, b, bc, grads, |k, _, _| g[k], |k, _, _| g[k], g.len());
            }
            &Op::Sub(a, b, bc) => {
                self.accumulate_broadcast(a, b, bc, grads, |k, _, _| g[k], |k, _, _| -g[k], g.len());
            }
            &Op::Mul(a, b, bc) => {
                self.accumulate_broadcast(a, b, bc, grads, |k, _, y| g[k] * y, |k, x, _| g[k] * x, g.len());
            }
            &Op::Scale(a, f) => {
                if wants(a) {
                    add_into(buf(grads, a, g.len()), g.iter().map(|v| v * f));
                }
            }
            &Op::AddScalar(a) => {
                if wants(a) {
                    add_into(buf(grads, a, g.len()), g.iter().copied());
                }
            }
            &Op::Relu(a) => {
                if wants(a) {
                    let x = self.data(a);
                    add_into(
                        buf(grads, a, g.len()),
                        g.iter().zip(x).map(|(gv, &xv)| if xv > 0.0 { *gv } else { 0.0 }),
                    );
                }
            }
            &Op::Gelu(a) => {
                if wants(a) {
                    let x = self.data(a);
                    add_into(buf(grads, a, g.len()), g.iter().zip(x).map(|(gv, &xv)| gv * gelu_grad(xv)));
                }
            }
            &Op::Abs(a) => {
                if wants(a) {
                    let x = self.data(a);
                    add_into(
                        buf(grads, a, g.len()),
                        g.iter().zip(x).map(|(gv, &xv)| {
                            if xv > 0.0 {
                                *gv
                            } else if xv < 0.0 {
                                -gv
                            } else {
                                0.0
                            }
                        }),
                    );
                }
            }
            &Op::MatMul(a, b, l) => self.matmul_backward(a, b, l, g, grads),
            Op::Permute(a, axes) => {
                let a = *a;
                if wants(a) {
                    let mut inverse = vec![0; axes.len()];
                    for (pos, &ax) in axes.iter().enumerate() {
                        inverse[ax] = pos;
                    }
                    let (back, _) = permute_data(g, self.nodes[i].value.shape(), &inverse);
                    add_into(buf(grads, a, g.len()), back.into_iter());
                }
            }
            &Op::Reshape(a) => {
                if wants(a) {
                    add_into(buf(grads, a, g.len()), g.iter().copied());
                }
            }
            Op::Concat(parts, axis) => {
                let shape = self.nodes[i].value.shape();
                let (outer, total, inner) = split_at_axis(shape, *axis);
                let mut offset = 0;
                for &p in parts {
                    let len = self.shape(p)[*axis];
                    if wants(p) {
                        let n = self.nodes[p].value.numel();
                        let dst = buf(grads, p, n);
                        for o in 0..outer {
                            let src = &g[o * total * inner + offset * inner..][..len * inner];
                            for (d, s) in dst[o * len * inner..(o + 1) * len * inner].iter_mut().zip(src) {
                                *d += s;
                            }
                        }
                    }
                    offset += len;
                }
            }
            &Op::Slice { input, axis, start } => {
                if wants(input) {
                    let in_shape = self.shape(input);
                    let (outer, len, inner) = split_at_axis(in_shape, axis);
                    let width = self.nodes[i].value.shape()[axis];
                    let dst = buf(grads, input, outer * len * inner);
                    for o in 0..outer {
                        let src = &g[o * width * inner..(o + 1) * width * inner];
                        let d = &mut dst[o * len * inner + start * inner..][..width * inner];
                        for (dv, sv) in d.iter_mut().zip(src) {
                            *dv += sv;
                        }
                    }
                }
            }
            &Op::Sum(a) => {
                if wants(a) {
                    let n = self.nodes[a].value.numel();
                    add_into(buf(grads, a, n), std::iter::repeat_n(g[0], n));
                }
            }
            &Op::Mean(a) => {
                if wants(a) {
                    let n = self.nodes[a].value.numel();
                    add_into(buf(grads, a, n), std::iter::repeat_n(g[0] / n as f64, n));
                }
            }
            &Op::Softmax(a, axis) => {
                if wants(a) {
                    let (outer, len, inner) = split_at_axis(self.nodes[i].value.shape(), axis);
                    let dst = buf(grads, a, g.len());
                    for o in 0..outer {
                        for c in 0..inner {
                            let at = |j: usize| o * len * inner + j * inner + c;
                            let dot: f64 = (0..len).map(|j| g[at(j)] * out[at(j)]).sum();
                            for j in 0..len {
                                dst[at(j)] += out[at(j)] * (g[at(j)] - dot);
                            }
                        }
                    }
                }
            }
            Op::LayerNorm {
                x,
                gamma,
                beta,
                normalized,
                inv_std,
            } => {
                let (x, gamma, beta) = (*x, *gamma, *beta);
                let width = self.shape(gamma)[0];
                let rows = g.len() / width;
                let gd = self.data(gamma);
                if wants(gamma) {
                    let dst = buf(grads, gamma, width);
                    for r in 0..rows {
                        for j in 0..width {
                            dst[j] += g[r * width + j] * normalized[r * width + j];
                        }
                    }
                }
                if wants(beta) {
                    let dst = buf(grads, beta, width);
                    for r in 0..rows {
                        for j in 0..width {
                            dst[j] += g[r * width + j];
                        }
                    }
                }
                if wants(x) {
                    let dst = buf(grads, x, g.len());
                    let n = width as f64;
                    for r in 0..rows {
                        let gr = &g[r * width..(r + 1) * width];
                        let xh = &normalized[r * width..(r + 1) * width];
                        let mut sum_d = 0.0;
                        let mut sum_dx = 0.0;
                        for j in 0..width {
                            let d = gr[j] * gd[j];
                            sum_d += d;
                            sum_dx += d * xh[j];
                        }
                        for j in 0..width {
                            let d = gr[j] * gd[j];
                            dst[r * width + j] += inv_std[r] / n * (n * d - sum_d - xh[j] * sum_dx);
                        }
                    }
                }
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn accumulate_broadcast(
        &self,
        a: usize,
        b: usize,
        bc: Broadcast,
        grads: &mut [Option<Vec<f64>>],
        ga: impl Fn(usize, f64, f64) -> f64,
        gb: impl Fn(usize, f64, f64) -> f64,
        n: usize,
    ) {
        let (da, db) = (self.data(a), self.data(b));
        let (la, lb) = (da.len(), db.len());
        let xa = |k: usize| match bc {
            Broadcast::LhsRepeated => da[k % la],
            _ => da[k],
        };
        let xb = |k: usize| match bc {
            Broadcast::RhsRepeated => db[k % lb],
            _ => db[k],
        };
        if self.nodes[a].requires_grad {
            let dst = buf(grads, a, la);
            for k in 0..n {
                dst[k % la] += ga(k, xa(k), xb(k));
            }
        }
        if self.nodes[b].requires_grad {
            let dst = buf(grads, b, lb);
            for k in 0..n {
                dst[k % lb] += gb(k, xa(k), xb(k));
            }
        }
    }

    fn matmul_backward(&self, a: usize, b: usize, l: MatMulLayout, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let MatMulLayout {
            batch,
            m,
            k,
            n,
            lhs_batched,
            rhs_batched,
        } = l;
        let (da, db) = (self.data(a), self.data(b));
        let (ki, ni) = (k as isize, n as isize);
        if lhs_batched && !rhs_batched {
            let rows = batch * m;
            if self.nodes[a].requires_grad {
                // dA = G Bᵀ
                let dst = buf(grads, a, rows * k);
                gemm(rows, n, k, g, ni, 1, db, 1, ni, 1.0, dst, ki, 1);
            }
            if self.nodes[b].requires_grad {
                // dB = Aᵀ G
                let dst = buf(grads, b, k * n);
                gemm(k, rows, n, da, 1, ki, g, ni, 1, 1.0, dst, ni, 1);
            }
            return;
        }
        let a_len = if lhs_batched { batch * m * k } else { m * k };
        let b_len = if rhs_batched { batch * k * n } else { k * n };
        for bi in 0..batch {
            let gb = &g[bi * m * n..(bi + 1) * m * n];
            let a_off = if lhs_batched { bi * m * k } else { 0 };
            let b_off = if rhs_batched { bi * k * n } else { 0 };
            if self.nodes[a].requires_grad {
                let dst = &mut buf(grads, a, a_len)[a_off..a_off + m * k];
                gemm(m, n, k, gb, ni, 1, &db[b_off..b_off + k * n], 1, ni, 1.0, dst, ki, 1);
            }
            if self.nodes[b].requires_grad {
                let dst = &mut buf(grads, b, b_len)[b_off..b_off + k * n];
                gemm(k, m, n, &da[a_off..a_off + m * k], 1, ki, gb, ni, 1, 1.0, dst, ni, 1);
            }
        }
    }
}

/// Gradients produced by [`Tape::backward`].
#[derive(Debug, Clone)]
pub struct Gradients {
    tape: u64,
    shapes: Vec<Vec<usize>>,
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// Gradient with respect to `v`; zeros when `v` was not reached from the loss.
    pub fn wrt(&self, v: Var) -> Tensor {
        assert_eq!(v.tape, self.tape, "variable belongs to a different tape");
        let shape = &self.shapes[v.index];
        match &self.grads[v.index] {
            Some(g) => Tensor::new(shape.clone(), g.clone()).expect("gradient shape"),
            None => Tensor::zeros(shape),
        }
    }

    /// Borrowed gradient data, `None` if unreached.
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        if v.tape != self.tape {
            return None;
        }
        self.grads.get(v.index)?.as_deref()
    }
}

fn buf(grads: &mut [Option<Vec<f64>>], i: usize, len: usize) -> &mut Vec<f64> {
    grads[i].get_or_insert_with(|| vec![0.0; len])
}

fn add_into(dst: &mut [f64], src: impl Iterator<Item = f64>) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + 0.044715 * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
}

#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    rsa: isize,
    csa: isize,
    b: &[f64],
    rsb: isize,
    csb: isize,
    beta: f64,
    c: &mut [f64],
    rsc: isize,
    csc: isize,
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    // SAFETY: every slice covers the full m×k, k×n and m×n extents addressed
    // through the given non-negative strides.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            rsc,
            csc,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn matmul_hand_example() {
        let mut tape = Tape::new();
        let a = tape.constant(t(&[2, 2], &[1., 2., 3., 4.])).unwrap();
        let b = tape.constant(t(&[2, 2], &[5., 6., 7., 8.])).unwrap();
        let c = tape.matmul(a, b).unwrap();
        assert_eq!(tape.value(c).data(), &[19., 22., 43., 50.]);
    }

    #[test]
    fn matmul_identity() {
        let mut tape = Tape::new();
        let data: Vec<f64> = (0..12).map(|i| i as f64 * 0.5 - 2.0).collect();
        let a = tape.constant(t(&[4, 3], &data)).unwrap();
        let eye = tape
            .constant(Tensor::from_fn(&[3, 3], |i| if i % 4 == 0 { 1.0 } else { 0.0 }))
            .unwrap();
        let c = tape.matmul(a, eye).unwrap();
        assert_eq!(tape.value(c).data(), &data[..]);
    }

    #[test]
    fn matmul_shape_error() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::zeros(&[2, 3])).unwrap();
        let b = tape.constant(Tensor::zeros(&[4, 5])).unwrap();
        assert!(matches!(tape.matmul(a, b), Err(TensorError::ShapeMismatch { .. })));
    }

    #[test]
    fn softmax_examples() {
        let mut tape = Tape::new();
        let x = tape.constant(t(&[2], &[0.0, 0.0])).unwrap();
        let y = tape.softmax(x, 0).unwrap();
        assert_eq!(tape.value(y).data(), &[0.5, 0.5]);

        let x = tape.constant(t(&[2], &[0.0, 2f64.ln()])).unwrap();
        let y = tape.softmax(x, 0).unwrap();
        let d = tape.value(y).data();
        assert!((d[0] - 1.0 / 3.0).abs() < 1e-15 && (d[1] - 2.0 / 3.0).abs() < 1e-15);

        let x = tape.constant(t(&[2], &[1000.0, 0.0])).unwrap();
        let y = tape.softmax(x, 0).unwrap();
        assert_eq!(tape.value(y).data(), &[1.0, 0.0]);
    }

    #[test]
    fn softmax_invalid_axis() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::zeros(&[2, 2])).unwrap();
        assert!(matches!(tape.softmax(x, 2), Err(TensorError::InvalidAxis { .. })));
    }

    #[test]
    fn layer_norm_examples() {
        let mut tape = Tape::new();
        let g = tape.constant(Tensor::ones(&[3])).unwrap();
        let b = tape.constant(Tensor::zeros(&[3])).unwrap();
        let x = tape.constant(t(&[3], &[2.0, 2.0, 2.0])).unwrap();
        let y = tape.layer_norm(x, g, b, 1e-5).unwrap();
        assert_eq!(tape.value(y).data(), &[0.0, 0.0, 0.0]);

        let g = tape.constant(Tensor::ones(&[2])).unwrap();
        let b = tape.constant(Tensor::zeros(&[2])).unwrap();
        let x = tape.constant(t(&[2], &[1.0, -1.0])).unwrap();
        let y = tape.layer_norm(x, g, b, 1e-12).unwrap();
        let d = tape.value(y).data();
        assert!((d[0] - 1.0).abs() < 1e-9 && (d[1] + 1.0).abs() < 1e-9);
    }

    #[test]
    fn layer_norm_rejects_bad_gamma() {
        let mut tape = Tape::new();
        let g = tape.constant(Tensor::ones(&[4])).unwrap();
        let b = tape.constant(Tensor::zeros(&[3])).unwrap();
        let x = tape.constant(Tensor::zeros(&[2, 3])).unwrap();
        assert!(tape.layer_norm(x, g, b, 1e-5).is_err());
    }

    #[test]
    fn square_gradient() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::scalar(3.0)).unwrap();
        let y = tape.mul(x, x).unwrap();
        assert_eq!(tape.backward(y).unwrap().wrt(x).data(), &[6.0]);
    }

    #[test]
    fn unreached_param_has_zero_gradient() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::scalar(3.0)).unwrap();
        let p = tape.param(Tensor::ones(&[2, 2])).unwrap();
        let y = tape.scale(x, 2.0).unwrap();
        let grads = tape.backward(y).unwrap();
        assert_eq!(grads.wrt(p), Tensor::zeros(&[2, 2]));
        assert!(grads.get(p).is_none());
    }

    #[test]
    fn sum_of_softmax_has_zero_gradient() {
        let mut tape = Tape::new();
        let x = tape.param(t(&[2, 3], &[0.3, -1.0, 2.0, 0.5, 0.1, -0.7])).unwrap();
        let y = tape.softmax(x, 1).unwrap();
        let s = tape.sum(y).unwrap();
        let g = tape.backward(s).unwrap().wrt(x);
        assert!(g.data().iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::zeros(&[2])).unwrap();
        assert!(matches!(tape.backward(x), Err(TensorError::NonScalarLoss(_))));
    }

    #[test]
    fn non_finite_forward_names_op() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::scalar(1e300)).unwrap();
        let err = tape.mul(x, x).unwrap_err();
        assert_eq!(err, TensorError::NonFinite { op: "mul" });
        assert!(tape.param(Tensor::scalar(f64::NAN)).is_err());
    }

    #[test]
    fn foreign_var_rejected() {
        let mut a = Tape::new();
        let mut b = Tape::new();
        let x = a.param(Tensor::scalar(1.0)).unwrap();
        assert_eq!(b.abs(x).unwrap_err(), TensorError::ForeignVar);
    }

    #[test]
    fn bias_broadcast_gradient_sums_rows() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::zeros(&[3, 2])).unwrap();
        let bias = tape.param(t(&[2], &[1.0, 2.0])).unwrap();
        let y = tape.add(x, bias).unwrap();
        assert_eq!(tape.value(y).data(), &[1., 2., 1., 2., 1., 2.]);
        let s = tape.sum(y).unwrap();
        assert_eq!(tape.backward(s).unwrap().wrt(bias).data(), &[3.0, 3.0]);
    }

    #[test]
    fn tape_values_survive_backward() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::scalar(2.0)).unwrap();
        let y = tape.mul(x, x).unwrap();
        let _ = tape.backward(y).unwrap();
        let _ = tape.backward(y).unwrap();
        assert_eq!(tape.value(y).item(), Some(4.0));
    }
}
