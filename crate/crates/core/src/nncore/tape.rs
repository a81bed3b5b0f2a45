//! Reverse-mode differentiation over a recorded computation.
//!
//! Every primitive appends one node holding its result. Nodes only ever
//! reference earlier nodes, so walking the node list backwards from the loss
//! is a valid reverse topological order and each node is visited once.

use std::collections::HashMap;

use super::{ops, ParamId, ParamStore, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Input,
    Param(ParamId),
    MatVec { w: NodeId, x: NodeId },
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Column { table: NodeId, index: usize },
    Sum(NodeId),
    AddN(Vec<NodeId>),
    SoftmaxCrossEntropy { logits: NodeId, target: usize },
}

#[derive(Clone, Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Ordered record of executed primitives.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: HashMap<ParamId, NodeId>,
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

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> NodeId {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    /// Overflow or a diverged parameter surfaces here as an error rather
    /// than as a poisoned value further down the tape.
    fn finite(op: &'static str, t: &Tensor) -> Result<()> {
        match t.data().iter().find(|v| !v.is_finite()) {
            Some(v) => Err(Error::NonFinite(format!("{op} produced {v}"))),
            None => Ok(()),
        }
    }

    fn needs(&self, ids: &[NodeId]) -> bool {
        ids.iter().any(|id| self.nodes[id.0].requires_grad)
    }

    /// A value that receives no gradient.
    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Input, false)
    }

    /// Brings a parameter onto the tape. Its value is copied once per tape;
    /// later calls with the same id return the same node.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> NodeId {
        if let Some(&node) = self.params.get(&id) {
            return node;
        }
        let node = self.push(store.value(id).clone(), Op::Param(id), true);
        self.params.insert(id, node);
        node
    }

    pub fn matvec(&mut self, w: NodeId, x: NodeId) -> Result<NodeId> {
        let (wt, xt) = (self.value(w), self.value(x));
        if !wt.is_matrix() {
            return Err(Error::dim("matvec", "W", "matrix", wt.shape()));
        }
        if !xt.is_vector() || xt.len() != wt.cols() {
            return Err(Error::dim("matvec", "x", [wt.cols()], xt.shape()));
        }
        let (rows, cols) = (wt.rows(), wt.cols());
        let (wd, xd) = (wt.data(), xt.data());
        let out: Vec<f64> = (0..rows)
            .map(|r| {
                wd[r * cols..(r + 1) * cols]
                    .iter()
                    .zip(xd)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect();
        let out = Tensor::new(vec![rows], out)?;
        let rg = self.needs(&[w, x]);
        Ok(self.push(out, Op::MatVec { w, x }, rg))
    }

    fn check_same(&self, op: &'static str, a: NodeId, b: NodeId) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(Error::dim(op, "rhs", sa, sb));
        }
        Ok(())
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.check_same("add", a, b)?;
        let mut out = self.value(a).clone();
        for (o, v) in out.data_mut().iter_mut().zip(self.value(b).data()) {
            *o += v;
        }
        Self::finite("add", &out)?;
        let rg = self.needs(&[a, b]);
        Ok(self.push(out, Op::Add(a, b), rg))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.check_same("mul", a, b)?;
        let mut out = self.value(a).clone();
        for (o, v) in out.data_mut().iter_mut().zip(self.value(b).data()) {
            *o *= v;
        }
        Self::finite("mul", &out)?;
        let rg = self.needs(&[a, b]);
        Ok(self.push(out, Op::Mul(a, b), rg))
    }

    pub fn scale(&mut self, a: NodeId, factor: f64) -> NodeId {
        let mut out = self.value(a).clone();
        out.data_mut().iter_mut().for_each(|v| *v *= factor);
        let rg = self.needs(&[a]);
        self.push(out, Op::Scale(a, factor), rg)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let mut out = self.value(a).clone();
        out.data_mut().iter_mut().for_each(|v| *v = ops::sigmoid(*v));
        let rg = self.needs(&[a]);
        self.push(out, Op::Sigmoid(a), rg)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let mut out = self.value(a).clone();
        out.data_mut().iter_mut().for_each(|v| *v = v.tanh());
        let rg = self.needs(&[a]);
        self.push(out, Op::Tanh(a), rg)
    }

    /// Column `index` of a matrix node; the gradient reaches that column only.
    pub fn column(&mut self, table: NodeId, index: usize) -> Result<NodeId> {
        let t = self.value(table);
        if !t.is_matrix() {
            return Err(Error::dim("column", "table", "matrix", t.shape()));
        }
        if index >= t.cols() {
            return Err(Error::Index {
                op: "column",
                index,
                size: t.cols(),
            });
        }
        let out = t.column(index);
        let rg = self.needs(&[table]);
        Ok(self.push(out, Op::Column { table, index }, rg))
    }

    /// Sum of all entries, as a scalar.
    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let s = self.value(a).data().iter().sum();
        let rg = self.needs(&[a]);
        self.push(Tensor::scalar(s), Op::Sum(a), rg)
    }

    /// Sum of same-shaped nodes, accumulated left to right.
    pub fn add_n(&mut self, terms: &[NodeId]) -> Result<NodeId> {
        let first = *terms.first().ok_or(Error::EmptyInput("add_n"))?;
        let mut out = self.value(first).clone();
        for &t in &terms[1..] {
            self.check_same("add_n", first, t)?;
            for (o, v) in out.data_mut().iter_mut().zip(self.value(t).data()) {
                *o += v;
            }
        }
        Self::finite("add_n", &out)?;
        let rg = self.needs(terms);
        Ok(self.push(out, Op::AddN(terms.to_vec()), rg))
    }

    /// `-log softmax(logits)[target]`, as a scalar.
    pub fn softmax_cross_entropy(&mut self, logits: NodeId, target: usize) -> Result<NodeId> {
        let l = self.value(logits);
        if !l.is_vector() {
            return Err(Error::dim("softmax_cross_entropy", "logits", "vector", l.shape()));
        }
        if target >= l.len() {
            return Err(Error::Index {
                op: "softmax_cross_entropy",
                index: target,
                size: l.len(),
            });
        }
        let loss = Tensor::new(vec![1], vec![-ops::log_softmax(l.data())[target]])?;
        let rg = self.needs(&[logits]);
        Ok(self.push(loss, Op::SoftmaxCrossEntropy { logits, target }, rg))
    }

    /// Accumulates `d loss / d value` into the `grad` of every parameter the
    /// loss depends on. The tape is left intact, so calling this twice
    /// accumulates twice. Returns the number of nodes visited.
    pub fn backward(&self, loss: NodeId, store: &mut ParamStore) -> Result<usize> {
        let lv = self.value(loss);
        if !lv.is_scalar() {
            return Err(Error::NotScalar {
                op: "backward",
                shape: lv.shape().to_vec(),
            });
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);
        let mut visited = 0;

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            visited += 1;
            match &node.op {
                Op::Input => {}
                Op::Param(pid) => {
                    let pg = store.get_mut(*pid).grad.data_mut();
                    for (p, v) in pg.iter_mut().zip(&g) {
                        *p += v;
                    }
                }
                Op::MatVec { w, x } => {
                    let wt = self.value(*w);
                    let xt = self.value(*x);
                    let cols = wt.cols();
                    if self.nodes[w.0].requires_grad {
                        let gw = self.grad_slot(&mut grads, *w);
                        for (r, gr) in g.iter().enumerate() {
                            if *gr == 0.0 {
                                continue;
                            }
                            let row = &mut gw[r * cols..(r + 1) * cols];
                            for (o, xv) in row.iter_mut().zip(xt.data()) {
                                *o += gr * xv;
                            }
                        }
                    }
                    if self.nodes[x.0].requires_grad {
                        let gx = self.grad_slot(&mut grads, *x);
                        let wd = wt.data();
                        for (r, gr) in g.iter().enumerate() {
                            let row = &wd[r * cols..(r + 1) * cols];
                            for (o, wv) in gx.iter_mut().zip(row) {
                                *o += gr * wv;
                            }
                        }
                    }
                }
                Op::Add(a, b) => {
                    for id in [*a, *b] {
                        self.accumulate(&mut grads, id, |slot| {
                            slot.iter_mut().zip(&g).for_each(|(o, v)| *o += v)
                        });
                    }
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                    self.accumulate(&mut grads, *a, |slot| {
                        for ((o, gv), other) in slot.iter_mut().zip(&g).zip(bv) {
                            *o += gv * other;
                        }
                    });
                    self.accumulate(&mut grads, *b, |slot| {
                        for ((o, gv), other) in slot.iter_mut().zip(&g).zip(av) {
                            *o += gv * other;
                        }
                    });
                }
                Op::Scale(a, factor) => {
                    self.accumulate(&mut grads, *a, |slot| {
                        slot.iter_mut().zip(&g).for_each(|(o, v)| *o += v * factor)
                    });
                }
                Op::Sigmoid(a) => {
                    let y = node.value.data();
                    self.accumulate(&mut grads, *a, |slot| {
                        for ((o, gv), yv) in slot.iter_mut().zip(&g).zip(y) {
                            *o += gv * yv * (1.0 - yv);
                        }
                    });
                }
                Op::Tanh(a) => {
                    let y = node.value.data();
                    self.accumulate(&mut grads, *a, |slot| {
                        for ((o, gv), yv) in slot.iter_mut().zip(&g).zip(y) {
                            *o += gv * (1.0 - yv * yv);
                        }
                    });
                }
                Op::Column { table, index } => {
                    let cols = self.value(*table).cols();
                    self.accumulate(&mut grads, *table, |slot| {
                        for (r, gv) in g.iter().enumerate() {
                            slot[r * cols + index] += gv;
                        }
                    });
                }
                Op::Sum(a) => {
                    let gv = g[0];
                    self.accumulate(&mut grads, *a, |slot| {
                        slot.iter_mut().for_each(|o| *o += gv)
                    });
                }
                Op::AddN(terms) => {
                    for &t in terms {
                        self.accumulate(&mut grads, t, |slot| {
                            slot.iter_mut().zip(&g).for_each(|(o, v)| *o += v)
                        });
                    }
                }
                Op::SoftmaxCrossEntropy { logits, target } => {
                    let p = ops::softmax(self.value(*logits).data());
                    let gv = g[0];
                    self.accumulate(&mut grads, *logits, |slot| {
                        for (k, (o, pk)) in slot.iter_mut().zip(&p).enumerate() {
                            let onehot = if k == *target { 1.0 } else { 0.0 };
                            *o += gv * (pk - onehot);
                        }
                    });
                }
            }
        }
        Ok(visited)
    }

    fn grad_slot<'g>(&self, grads: &'g mut [Option<Vec<f64>>], id: NodeId) -> &'g mut Vec<f64> {
        let len = self.nodes[id.0].value.len();
        grads[id.0].get_or_insert_with(|| vec![0.0; len])
    }

    fn accumulate(
        &self,
        grads: &mut [Option<Vec<f64>>],
        id: NodeId,
        f: impl FnOnce(&mut [f64]),
    ) {
        if self.nodes[id.0].requires_grad {
            f(self.grad_slot(grads, id));
        }
    }
}
