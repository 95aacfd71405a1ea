use super::graph::{axis_split, tap_major, BinaryKind, Graph, NodeId, Op, ReduceKind, Tensor, UnaryKind, LOG_CLAMP};
use crate::error::{Error, Result};

/// Gradients of a scalar loss with respect to every leaf that requires one.
#[derive(Debug, Clone)]
pub struct Gradients {
    by_node: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn get(&self, t: Tensor) -> Option<&[f64]> {
        self.by_node.get(t.id()).and_then(|g| g.as_deref())
    }

    pub fn take(&mut self, t: Tensor) -> Option<Vec<f64>> {
        self.by_node.get_mut(t.id()).and_then(Option::take)
    }

    /// `(node_id, grad)` pairs in node order.
    pub fn iter(&self) -> impl Iterator<Item = (NodeId, &[f64])> {
        self.by_node
            .iter()
            .enumerate()
            .filter_map(|(i, g)| g.as_deref().map(|g| (i, g)))
    }
}

fn accumulate(slot: &mut Option<Vec<f64>>, len: usize) -> &mut Vec<f64> {
    slot.get_or_insert_with(|| vec![0.0; len])
}

impl Graph {
    /// Reverse-mode sweep from a scalar `loss`, seeded with 1.0. Gradients of
    /// nodes consumed more than once are summed.
    pub fn backward(&self, loss: Tensor) -> Result<Gradients> {
        let n = self.nodes.len();
        if self.nodes[loss.id()].data.len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.nodes[loss.id()].shape
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; n];
        if !self.nodes[loss.id()].requires_grad {
            return Ok(Gradients { by_node: grads });
        }
        grads[loss.id()] = Some(vec![1.0]);

        for id in (0..=loss.id()).rev() {
            let node = &self.nodes[id];
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[id].take() else {
                continue;
            };
            self.propagate(id, &g, &mut grads);
        }

        for (id, node) in self.nodes.iter().enumerate() {
            if !(matches!(node.op, Op::Leaf) && node.requires_grad) {
                grads[id] = None;
            } else if grads[id].is_none() && id <= loss.id() {
                grads[id] = Some(vec![0.0; node.data.len()]);
            }
        }
        Ok(Gradients { by_node: grads })
    }

    fn wants(&self, id: NodeId) -> bool {
        self.nodes[id].requires_grad
    }

    fn propagate(&self, id: NodeId, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[id];
        let y = &node.data;
        match &node.op {
            Op::Leaf => {}
            Op::Binary(kind, a, b) => {
                let (a, b) = (*a, *b);
                let xa = &self.nodes[a].data;
                let xb = &self.nodes[b].data;
                let blen = xb.len();
                if self.wants(a) {
                    let ga = accumulate(&mut grads[a], xa.len());
                    match kind {
                        BinaryKind::Add | BinaryKind::Sub => {
                            ga.iter_mut().zip(g).for_each(|(d, gi)| *d += gi)
                        }
                        BinaryKind::Mul => {
                            for (i, d) in ga.iter_mut().enumerate() {
                                *d += g[i] * xb[i % blen];
                            }
                        }
                    }
                }
                if self.wants(b) {
                    let gb = accumulate(&mut grads[b], blen);
                    for (i, gi) in g.iter().enumerate() {
                        let contrib = match kind {
                            BinaryKind::Add => *gi,
                            BinaryKind::Sub => -gi,
                            BinaryKind::Mul => gi * xa[i],
                        };
                        gb[i % blen] += contrib;
                    }
                }
            }
            Op::Unary(kind, a) => {
                let a = *a;
                if !self.wants(a) {
                    return;
                }
                let x = &self.nodes[a].data;
                let ga = accumulate(&mut grads[a], x.len());
                for i in 0..g.len() {
                    let d = match kind {
                        UnaryKind::Neg => -1.0,
                        UnaryKind::Relu => {
                            if x[i] > 0.0 {
                                1.0
                            } else {
                                0.0
                            }
                        }
                        UnaryKind::Sigmoid => y[i] * (1.0 - y[i]),
                        UnaryKind::Tanh => 1.0 - y[i] * y[i],
                        UnaryKind::Log => {
                            if x[i] < LOG_CLAMP {
                                0.0
                            } else {
                                1.0 / x[i]
                            }
                        }
                    };
                    ga[i] += g[i] * d;
                }
            }
            Op::MatMul(a, b) => {
                let (a, b) = (*a, *b);
                let (m, k) = (self.nodes[a].shape[0], self.nodes[a].shape[1]);
                let nn = self.nodes[b].shape[1];
                let xa = &self.nodes[a].data;
                let xb = &self.nodes[b].data;
                if self.wants(a) {
                    // dA = dC · Bᵀ
                    let ga = accumulate(&mut grads[a], m * k);
                    for i in 0..m {
                        let gr = &g[i * nn..(i + 1) * nn];
                        for p in 0..k {
                            let br = &xb[p * nn..(p + 1) * nn];
                            let mut s = 0.0;
                            for j in 0..nn {
                                s += gr[j] * br[j];
                            }
                            ga[i * k + p] += s;
                        }
                    }
                }
                if self.wants(b) {
                    // dB = Aᵀ · dC
                    let gb = accumulate(&mut grads[b], k * nn);
                    for i in 0..m {
                        let gr = &g[i * nn..(i + 1) * nn];
                        for p in 0..k {
                            let av = xa[i * k + p];
                            let row = &mut gb[p * nn..(p + 1) * nn];
                            for j in 0..nn {
                                row[j] += av * gr[j];
                            }
                        }
                    }
                }
            }
            Op::Transpose(a) => {
                let a = *a;
                if !self.wants(a) {
                    return;
                }
                let (r, c) = (self.nodes[a].shape[0], self.nodes[a].shape[1]);
                let ga = accumulate(&mut grads[a], r * c);
                for i in 0..r {
                    for j in 0..c {
                        ga[i * c + j] += g[j * r + i];
                    }
                }
            }
            Op::Reduce {
                kind,
                input,
                axis,
                argmax,
            } => {
                let a = *input;
                if !self.wants(a) {
                    return;
                }
                let shape = &self.nodes[a].shape;
                let len_in = self.nodes[a].data.len();
                let ga = accumulate(&mut grads[a], len_in);
                if *kind == ReduceKind::Max {
                    for (dst, &src) in argmax.iter().enumerate() {
                        ga[src] += g[dst];
                    }
                    return;
                }
                let (outer, len, inner) = match axis {
                    None => (1, len_in, 1),
                    Some(ax) => axis_split(shape, *ax),
                };
                let scale = if *kind == ReduceKind::Mean {
                    1.0 / len as f64
                } else {
                    1.0
                };
                for o in 0..outer {
                    for l in 0..len {
                        for i in 0..inner {
                            ga[(o * len + l) * inner + i] += g[o * inner + i] * scale;
                        }
                    }
                }
            }
            Op::Reshape(a) => {
                let a = *a;
                if self.wants(a) {
                    let ga = accumulate(&mut grads[a], g.len());
                    ga.iter_mut().zip(g).for_each(|(d, gi)| *d += gi);
                }
            }
            Op::Narrow { input, axis, start } => {
                let a = *input;
                if !self.wants(a) {
                    return;
                }
                let in_shape = &self.nodes[a].shape;
                let (outer, alen, inner) = axis_split(in_shape, *axis);
                let len = node.shape[*axis];
                let ga = accumulate(&mut grads[a], outer * alen * inner);
                for o in 0..outer {
                    let to = (o * alen + start) * inner;
                    let from = o * len * inner;
                    for i in 0..len * inner {
                        ga[to + i] += g[from + i];
                    }
                }
            }
            Op::Concat { inputs, axis } => {
                let (outer, total, inner) = axis_split(&node.shape, *axis);
                let mut offset = 0;
                for &p in inputs {
                    let plen = self.nodes[p].shape[*axis];
                    if self.wants(p) {
                        let gp = accumulate(&mut grads[p], outer * plen * inner);
                        for o in 0..outer {
                            let from = (o * total + offset) * inner;
                            let to = o * plen * inner;
                            for i in 0..plen * inner {
                                gp[to + i] += g[from + i];
                            }
                        }
                    }
                    offset += plen;
                }
            }
            Op::Conv1d {
                input,
                kernel,
                bias,
                stride,
                padding,
            } => {
                let (xi, wi, bi) = (*input, *kernel, *bias);
                let (time, cin) = (self.nodes[xi].shape[0], self.nodes[xi].shape[1]);
                let (cout, k) = (self.nodes[wi].shape[0], self.nodes[wi].shape[2]);
                let out_time = node.shape[0];
                let x = &self.nodes[xi].data;
                let w = &self.nodes[wi].data;
                if self.wants(bi) {
                    let gb = accumulate(&mut grads[bi], cout);
                    for t in 0..out_time {
                        for o in 0..cout {
                            gb[o] += g[t * cout + o];
                        }
                    }
                }
                let want_w = self.wants(wi);
                let want_x = self.wants(xi);
                if !(want_w || want_x) {
                    return;
                }
                // Work in tap-major [k, out_ch, in_ch] layout for contiguous inner loops.
                let wt = tap_major(w, cout, cin, k);
                let mut gwt = if want_w { vec![0.0; w.len()] } else { Vec::new() };
                let mut gx = if want_x { vec![0.0; time * cin] } else { Vec::new() };
                for t in 0..out_time {
                    let gt = &g[t * cout..(t + 1) * cout];
                    for j in 0..k {
                        let pos = (t * stride + j) as isize - *padding as isize;
                        if pos < 0 || pos as usize >= time {
                            continue;
                        }
                        let pos = pos as usize;
                        let tap = j * cout * cin;
                        if want_w {
                            let xr = &x[pos * cin..(pos + 1) * cin];
                            for (o, &go) in gt.iter().enumerate() {
                                let dst = &mut gwt[tap + o * cin..tap + (o + 1) * cin];
                                for (d, xv) in dst.iter_mut().zip(xr) {
                                    *d += go * xv;
                                }
                            }
                        }
                        if want_x {
                            let row = &mut gx[pos * cin..(pos + 1) * cin];
                            for (o, &go) in gt.iter().enumerate() {
                                let wo = &wt[tap + o * cin..tap + (o + 1) * cin];
                                for (d, wv) in row.iter_mut().zip(wo) {
                                    *d += go * wv;
                                }
                            }
                        }
                    }
                }
                if want_w {
                    let dst = accumulate(&mut grads[wi], cout * cin * k);
                    for o in 0..cout {
                        for c in 0..cin {
                            for j in 0..k {
                                dst[(o * cin + c) * k + j] += gwt[(j * cout + o) * cin + c];
                            }
                        }
                    }
                }
                if want_x {
                    let dst = accumulate(&mut grads[xi], time * cin);
                    dst.iter_mut().zip(&gx).for_each(|(d, v)| *d += v);
                }
            }
            Op::MaxPool1d { input, argmax } => {
                let a = *input;
                if !self.wants(a) {
                    return;
                }
                let ga = accumulate(&mut grads[a], self.nodes[a].data.len());
                for (dst, &src) in argmax.iter().enumerate() {
                    ga[src] += g[dst];
                }
            }
        }
    }
}
