use std::ops::Deref;
use std::sync::Arc;

use super::array::{check_shape, Array};
use crate::error::{Error, Result};

/// Lower bound applied to the argument of `log`.
pub const LOG_CLAMP: f64 = 1e-12;

pub type NodeId = usize;

/// Handle to a node of a [`Graph`]. Only meaningful for the graph that created it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Tensor {
    id: NodeId,
}

impl Tensor {
    pub fn id(self) -> NodeId {
        self.id
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryKind {
    Neg,
    Relu,
    Sigmoid,
    Tanh,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryKind {
    Add,
    Sub,
    Mul,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementwiseKind {
    Add,
    Sub,
    Mul,
    Relu,
    Sigmoid,
    Tanh,
    Log,
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReduceKind {
    Sum,
    Mean,
    Max,
}

#[derive(Debug, Clone)]
pub(crate) enum Op {
    Leaf,
    Binary(BinaryKind, NodeId, NodeId),
    Unary(UnaryKind, NodeId),
    MatMul(NodeId, NodeId),
    Transpose(NodeId),
    Reduce {
        kind: ReduceKind,
        input: NodeId,
        axis: Option<usize>,
        /// Flat source index of each output element (max only).
        argmax: Vec<usize>,
    },
    Reshape(NodeId),
    Narrow {
        input: NodeId,
        axis: usize,
        start: usize,
    },
    Concat {
        inputs: Vec<NodeId>,
        axis: usize,
    },
    Conv1d {
        input: NodeId,
        kernel: NodeId,
        bias: NodeId,
        stride: usize,
        padding: usize,
    },
    MaxPool1d {
        input: NodeId,
        argmax: Vec<usize>,
    },
}

#[derive(Debug, Clone)]
pub(crate) enum Storage {
    Owned(Vec<f64>),
    Shared(Arc<Vec<f64>>),
}

impl Deref for Storage {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        match self {
            Storage::Owned(v) => v,
            Storage::Shared(v) => v,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Node {
    pub(crate) shape: Vec<usize>,
    pub(crate) data: Storage,
    pub(crate) op: Op,
    pub(crate) requires_grad: bool,
}

/// Define-by-run computation graph. Nodes are appended in evaluation order, so
/// insertion order is already a topological order.
#[derive(Debug, Default, Clone)]
pub struct Graph {
    pub(crate) nodes: Vec<Node>,
}

/// Splits `shape` around `axis` into (outer, axis length, inner) strides.
pub(crate) fn axis_split(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn shape(&self, t: Tensor) -> &[usize] {
        &self.nodes[t.id].shape
    }

    pub fn value(&self, t: Tensor) -> &[f64] {
        &self.nodes[t.id].data
    }

    pub fn requires_grad(&self, t: Tensor) -> bool {
        self.nodes[t.id].requires_grad
    }

    pub fn to_array(&self, t: Tensor) -> Array {
        let node = &self.nodes[t.id];
        Array::new(node.shape.clone(), node.data.to_vec()).expect("graph node shape is valid")
    }

    /// Ids of the direct inputs of a node; empty for leaves.
    pub fn inputs_of(&self, t: Tensor) -> Vec<NodeId> {
        match &self.nodes[t.id].op {
            Op::Leaf => vec![],
            Op::Binary(_, a, b) | Op::MatMul(a, b) => vec![*a, *b],
            Op::Unary(_, a) | Op::Transpose(a) | Op::Reshape(a) => vec![*a],
            Op::Reduce { input, .. } | Op::Narrow { input, .. } | Op::MaxPool1d { input, .. } => {
                vec![*input]
            }
            Op::Concat { inputs, .. } => inputs.clone(),
            Op::Conv1d {
                input,
                kernel,
                bias,
                ..
            } => vec![*input, *kernel, *bias],
        }
    }

    fn push(&mut self, shape: Vec<usize>, data: Storage, op: Op, requires_grad: bool) -> Tensor {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        let id = self.nodes.len();
        self.nodes.push(Node {
            shape,
            data,
            op,
            requires_grad,
        });
        Tensor { id }
    }

    fn push_op(&mut self, shape: Vec<usize>, data: Vec<f64>, op: Op, inputs: &[NodeId]) -> Tensor {
        let requires_grad = inputs.iter().any(|&i| self.nodes[i].requires_grad);
        self.push(shape, Storage::Owned(data), op, requires_grad)
    }

    /// Constant leaf; never receives a gradient.
    pub fn constant(&mut self, array: Array) -> Tensor {
        let shape = array.shape().to_vec();
        self.push(shape, Storage::Owned(array.into_data()), Op::Leaf, false)
    }

    pub fn scalar(&mut self, value: f64) -> Tensor {
        self.constant(Array::scalar(value))
    }

    /// Leaf that participates in differentiation.
    pub fn variable(&mut self, array: Array) -> Tensor {
        let shape = array.shape().to_vec();
        self.push(shape, Storage::Owned(array.into_data()), Op::Leaf, true)
    }

    /// Leaf backed by shared parameter storage, avoiding a copy per forward pass.
    pub fn parameter(&mut self, shape: &[usize], data: Arc<Vec<f64>>) -> Result<Tensor> {
        check_shape(shape, data.len())?;
        Ok(self.push(shape.to_vec(), Storage::Shared(data), Op::Leaf, true))
    }

    /// Shared-storage leaf that does not require a gradient (frozen weights, data).
    pub fn shared_constant(&mut self, shape: &[usize], data: Arc<Vec<f64>>) -> Result<Tensor> {
        check_shape(shape, data.len())?;
        Ok(self.push(shape.to_vec(), Storage::Shared(data), Op::Leaf, false))
    }

    pub fn elementwise(
        &mut self,
        kind: ElementwiseKind,
        a: Tensor,
        b: Option<Tensor>,
    ) -> Result<Tensor> {
        let binary = |k| {
            b.ok_or_else(|| Error::Contract(format!("{kind:?} needs a second operand")))
                .map(|b| (k, b))
        };
        match kind {
            ElementwiseKind::Add => binary(BinaryKind::Add).and_then(|(k, b)| self.binary(k, a, b)),
            ElementwiseKind::Sub => binary(BinaryKind::Sub).and_then(|(k, b)| self.binary(k, a, b)),
            ElementwiseKind::Mul => binary(BinaryKind::Mul).and_then(|(k, b)| self.binary(k, a, b)),
            ElementwiseKind::Relu => Ok(self.unary(UnaryKind::Relu, a)),
            ElementwiseKind::Sigmoid => Ok(self.unary(UnaryKind::Sigmoid, a)),
            ElementwiseKind::Tanh => Ok(self.unary(UnaryKind::Tanh, a)),
            ElementwiseKind::Log => Ok(self.unary(UnaryKind::Log, a)),
            ElementwiseKind::Neg => Ok(self.unary(UnaryKind::Neg, a)),
        }
    }

    pub fn add(&mut self, a: Tensor, b: Tensor) -> Result<Tensor> {
        self.binary(BinaryKind::Add, a, b)
    }

    pub fn sub(&mut self, a: Tensor, b: Tensor) -> Result<Tensor> {
        self.binary(BinaryKind::Sub, a, b)
    }

    pub fn mul(&mut self, a: Tensor, b: Tensor) -> Result<Tensor> {
        self.binary(BinaryKind::Mul, a, b)
    }

    pub fn neg(&mut self, a: Tensor) -> Tensor {
        self.unary(UnaryKind::Neg, a)
    }

    pub fn relu(&mut self, a: Tensor) -> Tensor {
        self.unary(UnaryKind::Relu, a)
    }

    pub fn sigmoid(&mut self, a: Tensor) -> Tensor {
        self.unary(UnaryKind::Sigmoid, a)
    }

    pub fn tanh(&mut self, a: Tensor) -> Tensor {
        self.unary(UnaryKind::Tanh, a)
    }

    pub fn log(&mut self, a: Tensor) -> Tensor {
        self.unary(UnaryKind::Log, a)
    }

    /// `b` must either match `a`'s shape, be a trailing suffix of it (row
    /// broadcast), or hold a single element.
    pub fn binary(&mut self, kind: BinaryKind, a: Tensor, b: Tensor) -> Result<Tensor> {
        let sa = &self.nodes[a.id].shape;
        let sb = &self.nodes[b.id].shape;
        let b_len = self.nodes[b.id].data.len();
        let broadcastable = b_len == 1 || (sb.len() <= sa.len() && sa.ends_with(sb));
        if !broadcastable {
            return Err(Error::Dimension(format!(
                "{kind:?}: shapes {sa:?} and {sb:?} are not compatible"
            )));
        }
        let xa = &self.nodes[a.id].data;
        let xb = &self.nodes[b.id].data;
        let out: Vec<f64> = match kind {
            BinaryKind::Add => xa.iter().enumerate().map(|(i, v)| v + xb[i % b_len]).collect(),
            BinaryKind::Sub => xa.iter().enumerate().map(|(i, v)| v - xb[i % b_len]).collect(),
            BinaryKind::Mul => xa.iter().enumerate().map(|(i, v)| v * xb[i % b_len]).collect(),
        };
        let shape = sa.clone();
        Ok(self.push_op(shape, out, Op::Binary(kind, a.id, b.id), &[a.id, b.id]))
    }

    pub fn unary(&mut self, kind: UnaryKind, a: Tensor) -> Tensor {
        let x = &self.nodes[a.id].data;
        let out: Vec<f64> = match kind {
            UnaryKind::Neg => x.iter().map(|v| -v).collect(),
            UnaryKind::Relu => x.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect(),
            UnaryKind::Sigmoid => x.iter().map(|&v| sigmoid(v)).collect(),
            UnaryKind::Tanh => x.iter().map(|v| v.tanh()).collect(),
            UnaryKind::Log => x.iter().map(|v| v.max(LOG_CLAMP).ln()).collect(),
        };
        let shape = self.nodes[a.id].shape.clone();
        self.push_op(shape, out, Op::Unary(kind, a.id), &[a.id])
    }

    pub fn matmul(&mut self, a: Tensor, b: Tensor) -> Result<Tensor> {
        let sa = &self.nodes[a.id].shape;
        let sb = &self.nodes[b.id].shape;
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::Dimension(format!(
                "matmul: shapes {sa:?} and {sb:?} do not chain"
            )));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let out = matmul_kernel(&self.nodes[a.id].data, &self.nodes[b.id].data, m, k, n);
        Ok(self.push_op(vec![m, n], out, Op::MatMul(a.id, b.id), &[a.id, b.id]))
    }

    pub fn transpose(&mut self, a: Tensor) -> Result<Tensor> {
        let s = &self.nodes[a.id].shape;
        if s.len() != 2 {
            return Err(Error::Dimension(format!("transpose expects rank 2, got {s:?}")));
        }
        let (r, c) = (s[0], s[1]);
        let x = &self.nodes[a.id].data;
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = x[i * c + j];
            }
        }
        Ok(self.push_op(vec![c, r], out, Op::Transpose(a.id), &[a.id]))
    }

    /// Reduces over `axis`, or over every element when `axis` is `None`.
    /// Max routes its gradient to the first maximal element.
    pub fn reduce(&mut self, kind: ReduceKind, a: Tensor, axis: Option<usize>) -> Result<Tensor> {
        let shape = self.nodes[a.id].shape.clone();
        let x = &self.nodes[a.id].data;
        let (outer, len, inner, out_shape) = match axis {
            None => (1, x.len(), 1, vec![1]),
            Some(ax) if ax < shape.len() => {
                let (o, l, i) = axis_split(&shape, ax);
                let mut s = shape.clone();
                s.remove(ax);
                if s.is_empty() {
                    s.push(1);
                }
                (o, l, i, s)
            }
            Some(ax) => {
                return Err(Error::Dimension(format!(
                    "reduce axis {ax} out of range for shape {shape:?}"
                )))
            }
        };
        let mut out = vec![0.0; outer * inner];
        let mut argmax = Vec::new();
        if kind == ReduceKind::Max {
            argmax = vec![0; outer * inner];
        }
        for o in 0..outer {
            for i in 0..inner {
                let base = o * len * inner + i;
                let dst = o * inner + i;
                match kind {
                    ReduceKind::Sum | ReduceKind::Mean => {
                        let mut s = 0.0;
                        for l in 0..len {
                            s += x[base + l * inner];
                        }
                        out[dst] = if kind == ReduceKind::Mean { s / len as f64 } else { s };
                    }
                    ReduceKind::Max => {
                        let mut best = base;
                        for l in 1..len {
                            let idx = base + l * inner;
                            if x[idx] > x[best] {
                                best = idx;
                            }
                        }
                        out[dst] = x[best];
                        argmax[dst] = best;
                    }
                }
            }
        }
        Ok(self.push_op(
            out_shape,
            out,
            Op::Reduce {
                kind,
                input: a.id,
                axis,
                argmax,
            },
            &[a.id],
        ))
    }

    pub fn sum(&mut self, a: Tensor) -> Tensor {
        self.reduce(ReduceKind::Sum, a, None)
            .expect("full reduction has no axis to validate")
    }

    pub fn mean(&mut self, a: Tensor) -> Tensor {
        self.reduce(ReduceKind::Mean, a, None)
            .expect("full reduction has no axis to validate")
    }

    pub fn reshape(&mut self, a: Tensor, shape: Vec<usize>) -> Result<Tensor> {
        check_shape(&shape, self.nodes[a.id].data.len())?;
        let data = self.nodes[a.id].data.to_vec();
        Ok(self.push_op(shape, data, Op::Reshape(a.id), &[a.id]))
    }

    /// Contiguous slice `[start, start + len)` along `axis`.
    pub fn narrow(&mut self, a: Tensor, axis: usize, start: usize, len: usize) -> Result<Tensor> {
        let shape = self.nodes[a.id].shape.clone();
        if axis >= shape.len() || len == 0 || start + len > shape[axis] {
            return Err(Error::Dimension(format!(
                "narrow [{start}, {}) on axis {axis} out of range for shape {shape:?}",
                start + len
            )));
        }
        let (outer, alen, inner) = axis_split(&shape, axis);
        let x = &self.nodes[a.id].data;
        let mut out = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let from = (o * alen + start) * inner;
            out.extend_from_slice(&x[from..from + len * inner]);
        }
        let mut out_shape = shape;
        out_shape[axis] = len;
        Ok(self.push_op(
            out_shape,
            out,
            Op::Narrow {
                input: a.id,
                axis,
                start,
            },
            &[a.id],
        ))
    }

    pub fn concat(&mut self, parts: &[Tensor], axis: usize) -> Result<Tensor> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Contract("concat of zero tensors".into()))?;
        let base = self.nodes[first.id].shape.clone();
        if axis >= base.len() {
            return Err(Error::Dimension(format!(
                "concat axis {axis} out of range for shape {base:?}"
            )));
        }
        let mut total = 0;
        for p in parts {
            let s = &self.nodes[p.id].shape;
            let compatible = s.len() == base.len()
                && s.iter()
                    .zip(&base)
                    .enumerate()
                    .all(|(d, (x, y))| d == axis || x == y);
            if !compatible {
                return Err(Error::Dimension(format!(
                    "concat: shapes {base:?} and {s:?} differ off axis {axis}"
                )));
            }
            total += s[axis];
        }
        let (outer, _, inner) = axis_split(&base, axis);
        let mut out = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for p in parts {
                let node = &self.nodes[p.id];
                let chunk = node.shape[axis] * inner;
                out.extend_from_slice(&node.data[o * chunk..(o + 1) * chunk]);
            }
        }
        let mut shape = base;
        shape[axis] = total;
        let ids: Vec<NodeId> = parts.iter().map(|p| p.id).collect();
        Ok(self.push_op(
            shape,
            out,
            Op::Concat {
                inputs: ids.clone(),
                axis,
            },
            &ids,
        ))
    }

    /// 1-D convolution over `input [time, in_ch]` with `kernel [out_ch, in_ch, k]`
    /// and `bias [out_ch]`, zero-padded at both ends. Output is `[out_time, out_ch]`.
    pub fn conv1d(
        &mut self,
        input: Tensor,
        kernel: Tensor,
        bias: Tensor,
        stride: usize,
        padding: usize,
    ) -> Result<Tensor> {
        let si = self.nodes[input.id].shape.clone();
        let sk = self.nodes[kernel.id].shape.clone();
        let sb = self.nodes[bias.id].shape.clone();
        if si.len() != 2 || sk.len() != 3 || sk[1] != si[1] || sb != [sk[0]] {
            return Err(Error::Dimension(format!(
                "conv1d: input {si:?}, kernel {sk:?}, bias {sb:?} are inconsistent"
            )));
        }
        if stride == 0 {
            return Err(Error::Contract("conv1d stride must be >= 1".into()));
        }
        let (time, cin) = (si[0], si[1]);
        let (cout, k) = (sk[0], sk[2]);
        let padded = time + 2 * padding;
        if padded < k {
            let out_time = (padded as i64 - k as i64).div_euclid(stride as i64) + 1;
            return Err(Error::Shape(format!(
                "conv1d: input of length {time} with padding {padding} is too short for kernel {k} (out_time = {out_time})"
            )));
        }
        let out_time = (padded - k) / stride + 1;
        let x = &self.nodes[input.id].data;
        let w = tap_major(&self.nodes[kernel.id].data, cout, cin, k);
        let b = &self.nodes[bias.id].data;
        let mut out = vec![0.0; out_time * cout];
        for t in 0..out_time {
            let row = &mut out[t * cout..(t + 1) * cout];
            row.copy_from_slice(b);
            for j in 0..k {
                let pos = (t * stride + j) as isize - padding as isize;
                if pos < 0 || pos as usize >= time {
                    continue;
                }
                let xr = &x[pos as usize * cin..(pos as usize + 1) * cin];
                let wj = &w[j * cout * cin..(j + 1) * cout * cin];
                for (acc, wo) in row.iter_mut().zip(wj.chunks_exact(cin)) {
                    *acc += dot(wo, xr);
                }
            }
        }
        Ok(self.push_op(
            vec![out_time, cout],
            out,
            Op::Conv1d {
                input: input.id,
                kernel: kernel.id,
                bias: bias.id,
                stride,
                padding,
            },
            &[input.id, kernel.id, bias.id],
        ))
    }

    /// Max pooling over the time axis of `input [time, channels]`.
    pub fn maxpool1d(&mut self, input: Tensor, pool_size: usize, stride: usize) -> Result<Tensor> {
        let s = self.nodes[input.id].shape.clone();
        if s.len() != 2 {
            return Err(Error::Dimension(format!("maxpool1d expects [time, channels], got {s:?}")));
        }
        if pool_size == 0 || stride == 0 {
            return Err(Error::Contract("maxpool1d pool_size and stride must be >= 1".into()));
        }
        let (time, ch) = (s[0], s[1]);
        if time < pool_size {
            return Err(Error::Shape(format!(
                "maxpool1d: time {time} is shorter than pool size {pool_size}"
            )));
        }
        let out_time = (time - pool_size) / stride + 1;
        let x = &self.nodes[input.id].data;
        let mut out = vec![0.0; out_time * ch];
        let mut argmax = vec![0; out_time * ch];
        for t in 0..out_time {
            for c in 0..ch {
                let mut best = t * stride * ch + c;
                for p in 1..pool_size {
                    let idx = (t * stride + p) * ch + c;
                    if x[idx] > x[best] {
                        best = idx;
                    }
                }
                out[t * ch + c] = x[best];
                argmax[t * ch + c] = best;
            }
        }
        Ok(self.push_op(
            vec![out_time, ch],
            out,
            Op::MaxPool1d {
                input: input.id,
                argmax,
            },
            &[input.id],
        ))
    }
}

pub(crate) fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn matmul_kernel(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            let br = &b[p * n..(p + 1) * n];
            for (o, bv) in row.iter_mut().zip(br) {
                *o += av * bv;
            }
        }
    }
    out
}

/// Reorders a `[out_ch, in_ch, k]` kernel to `[k, out_ch, in_ch]` so each tap's
/// weights are contiguous per output channel.
pub(crate) fn tap_major(w: &[f64], cout: usize, cin: usize, k: usize) -> Vec<f64> {
    let mut out = vec![0.0; w.len()];
    for o in 0..cout {
        for c in 0..cin {
            for j in 0..k {
                out[(j * cout + o) * cin + c] = w[(o * cin + c) * k + j];
            }
        }
    }
    out
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
