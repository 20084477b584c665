//! Reverse-mode differentiation over dense `f64` matrices.
//!
//! A [`Tape`] records every operation in execution order, so a node's
//! parents always precede it and a single reverse sweep visits nodes in
//! valid order. Handles ([`DiffMatrix`]) are cheap `Copy` indices into the
//! tape; values are reference counted so large constants such as a
//! normalized adjacency can be shared across tapes without copying.
//!
//! ```
//! use dgnn::autodiff::Tape;
//! use nalgebra::dmatrix;
//!
//! let tape = Tape::new();
//! let a = tape.param(dmatrix![1.0, 2.0; 3.0, 4.0]);
//! let loss = a.mul(a).unwrap().sum().scale(0.5);
//! let grads = tape.backward(loss).unwrap();
//! assert_eq!(grads.get(a).unwrap(), &dmatrix![1.0, 2.0; 3.0, 4.0]);
//! ```
//!
//! Every intermediate is retained until the tape is dropped or reset; a
//! forward pass over `N` nodes therefore holds each `N × N` product alive
//! for the backward sweep.

use std::cell::{Cell, RefCell};
use std::collections::HashMap;
use std::rc::Rc;

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};

pub type NodeId = usize;

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    Transpose(NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Scale(NodeId, f64),
    Mul(NodeId, NodeId),
    Sigmoid(NodeId),
    AddRow(NodeId, NodeId),
    ConcatCols(Vec<NodeId>),
    SoftmaxRows(NodeId),
    CrossEntropy { pred: NodeId, targets: Vec<(usize, usize)> },
    SoftmaxCrossEntropy { logits: NodeId, targets: Vec<(usize, usize)> },
    Dropout { input: NodeId, mask: DMatrix<f64> },
    Sum(NodeId),
}

#[derive(Debug)]
struct Node {
    value: Rc<DMatrix<f64>>,
    op: Op,
    requires_grad: bool,
}

/// Records operations for one forward/backward pass.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    flops: Cell<u64>,
}

/// A matrix living on a [`Tape`].
#[derive(Debug, Clone, Copy)]
pub struct DiffMatrix<'t> {
    tape: &'t Tape,
    id: NodeId,
}

/// Gradients of a scalar loss with respect to every trainable leaf.
#[derive(Debug, Default)]
pub struct GradientStore {
    grads: HashMap<NodeId, DMatrix<f64>>,
}

impl GradientStore {
    pub fn get(&self, var: DiffMatrix<'_>) -> Option<&DMatrix<f64>> {
        self.grads.get(&var.id)
    }

    pub fn take(&mut self, var: DiffMatrix<'_>) -> Option<DMatrix<f64>> {
        self.grads.remove(&var.id)
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }
}

fn shape_err(op: &'static str, lhs: (usize, usize), rhs: (usize, usize)) -> Error {
    Error::Shape { op, lhs, rhs }
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn check_targets(
    op: &'static str,
    shape: (usize, usize),
    labels: &[usize],
    mask: &[usize],
) -> Result<Vec<(usize, usize)>> {
    if mask.is_empty() {
        return Err(Error::EmptyMask(op));
    }
    if labels.len() != shape.0 {
        return Err(Error::RowMismatch {
            what: "labels",
            expected: shape.0,
            found: labels.len(),
        });
    }
    mask.iter()
        .map(|&i| {
            if i >= shape.0 {
                return Err(shape_err(op, shape, (i, 0)));
            }
            let label = labels[i];
            if label >= shape.1 {
                return Err(Error::LabelOutOfRange {
                    label,
                    classes: shape.1,
                });
            }
            Ok((i, label))
        })
        .collect()
}

fn row_softmax(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for mut row in out.row_iter_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            z += *v;
        }
        row /= z;
    }
    out
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// A trainable leaf.
    pub fn param(&self, value: DMatrix<f64>) -> DiffMatrix<'_> {
        self.push(Rc::new(value), Op::Leaf, true)
    }

    /// A leaf that never receives a gradient.
    pub fn constant(&self, value: DMatrix<f64>) -> DiffMatrix<'_> {
        self.push(Rc::new(value), Op::Leaf, false)
    }

    pub fn constant_shared(&self, value: Rc<DMatrix<f64>>) -> DiffMatrix<'_> {
        self.push(value, Op::Leaf, false)
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Multiply-add and elementwise operations performed by the forward
    /// pass so far. A matrix product `m×k · k×n` counts `m·k·n`.
    pub fn flops(&self) -> u64 {
        self.flops.get()
    }

    /// Drops every recorded node so the tape can be reused.
    pub fn reset(&mut self) {
        self.nodes.get_mut().clear();
        self.flops.set(0);
    }

    fn push(&self, value: Rc<DMatrix<f64>>, op: Op, requires_grad: bool) -> DiffMatrix<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        DiffMatrix {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    fn value(&self, id: NodeId) -> Rc<DMatrix<f64>> {
        Rc::clone(&self.nodes.borrow()[id].value)
    }

    fn requires_grad(&self, id: NodeId) -> bool {
        self.nodes.borrow()[id].requires_grad
    }

    fn count(&self, n: usize) {
        self.flops.set(self.flops.get() + n as u64);
    }

    /// Propagates the gradient of a `1 × 1` loss back to every trainable
    /// leaf. Gradients from multiple uses of a node are summed.
    pub fn backward(&self, loss: DiffMatrix<'_>) -> Result<GradientStore> {
        let nodes = self.nodes.borrow();
        let shape = nodes[loss.id].value.shape();
        if shape != (1, 1) {
            return Err(Error::NonScalarLoss(shape));
        }
        let mut grads: Vec<Option<DMatrix<f64>>> = Vec::new();
        grads.resize_with(loss.id + 1, || None);
        grads[loss.id] = Some(DMatrix::from_element(1, 1, 1.0));
        let mut store = GradientStore::default();

        let accumulate = |grads: &mut Vec<Option<DMatrix<f64>>>, id: NodeId, g: DMatrix<f64>| {
            if !nodes[id].requires_grad {
                return;
            }
            match &mut grads[id] {
                Some(acc) => *acc += g,
                slot => *slot = Some(g),
            }
        };

        for id in (0..=loss.id).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &nodes[id];
            match &node.op {
                Op::Leaf => {
                    if node.requires_grad {
                        store.grads.insert(id, g);
                    }
                }
                Op::MatMul(a, b) => {
                    if nodes[*a].requires_grad {
                        let ga = &g * nodes[*b].value.transpose();
                        accumulate(&mut grads, *a, ga);
                    }
                    if nodes[*b].requires_grad {
                        let gb = nodes[*a].value.transpose() * &g;
                        accumulate(&mut grads, *b, gb);
                    }
                }
                Op::Transpose(a) => accumulate(&mut grads, *a, g.transpose()),
                Op::Add(a, b) => {
                    if nodes[*b].requires_grad {
                        accumulate(&mut grads, *b, g.clone());
                    }
                    accumulate(&mut grads, *a, g);
                }
                Op::Sub(a, b) => {
                    if nodes[*b].requires_grad {
                        accumulate(&mut grads, *b, -&g);
                    }
                    accumulate(&mut grads, *a, g);
                }
                Op::Scale(a, s) => accumulate(&mut grads, *a, g * *s),
                Op::Mul(a, b) => {
                    if nodes[*a].requires_grad {
                        accumulate(&mut grads, *a, g.component_mul(&nodes[*b].value));
                    }
                    if nodes[*b].requires_grad {
                        accumulate(&mut grads, *b, g.component_mul(&nodes[*a].value));
                    }
                }
                Op::Sigmoid(a) => {
                    let y = &node.value;
                    let mut ga = g;
                    ga.zip_apply(y.as_ref(), |gv, yv| *gv *= yv * (1.0 - yv));
                    accumulate(&mut grads, *a, ga);
                }
                Op::AddRow(a, b) => {
                    if nodes[*b].requires_grad {
                        let gb = DMatrix::from_fn(1, g.ncols(), |_, j| g.column(j).sum());
                        accumulate(&mut grads, *b, gb);
                    }
                    accumulate(&mut grads, *a, g);
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let cols = nodes[p].value.ncols();
                        if nodes[p].requires_grad {
                            let gp = g.columns(offset, cols).into_owned();
                            accumulate(&mut grads, p, gp);
                        }
                        offset += cols;
                    }
                }
                Op::SoftmaxRows(a) => {
                    // dL/dx = y ⊙ (g − rowsum(g ⊙ y))
                    let y = &node.value;
                    let mut ga = g.component_mul(y);
                    for (mut row, yrow) in ga.row_iter_mut().zip(y.row_iter()) {
                        let s: f64 = row.sum();
                        for (v, yv) in row.iter_mut().zip(yrow.iter()) {
                            *v -= yv * s;
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::CrossEntropy { pred, targets } => {
                    let p = &nodes[*pred].value;
                    let scale = g[(0, 0)] / targets.len() as f64;
                    let mut gp = DMatrix::zeros(p.nrows(), p.ncols());
                    for &(i, c) in targets {
                        gp[(i, c)] -= scale / p[(i, c)].max(f64::MIN_POSITIVE);
                    }
                    accumulate(&mut grads, *pred, gp);
                }
                Op::SoftmaxCrossEntropy { logits, targets } => {
                    let z = &nodes[*logits].value;
                    let scale = g[(0, 0)] / targets.len() as f64;
                    let mut gz = DMatrix::zeros(z.nrows(), z.ncols());
                    let mut rows: Vec<usize> = targets.iter().map(|t| t.0).collect();
                    rows.sort_unstable();
                    rows.dedup();
                    let probs = row_softmax(&z.select_rows(&rows));
                    for &(i, c) in targets {
                        let r = rows.binary_search(&i).expect("row present");
                        for k in 0..z.ncols() {
                            gz[(i, k)] += scale * probs[(r, k)];
                        }
                        gz[(i, c)] -= scale;
                    }
                    accumulate(&mut grads, *logits, gz);
                }
                Op::Dropout { input, mask } => accumulate(&mut grads, *input, g.component_mul(mask)),
                Op::Sum(a) => {
                    let (r, c) = nodes[*a].value.shape();
                    accumulate(&mut grads, *a, DMatrix::from_element(r, c, g[(0, 0)]));
                }
            }
        }
        Ok(store)
    }
}

impl<'t> DiffMatrix<'t> {
    pub fn id(self) -> NodeId {
        self.id
    }

    pub fn tape(self) -> &'t Tape {
        self.tape
    }

    pub fn value(self) -> Rc<DMatrix<f64>> {
        self.tape.value(self.id)
    }

    pub fn shape(self) -> (usize, usize) {
        self.tape.nodes.borrow()[self.id].value.shape()
    }

    pub fn requires_grad(self) -> bool {
        self.tape.requires_grad(self.id)
    }

    fn unary(self, value: DMatrix<f64>, op: Op) -> DiffMatrix<'t> {
        let rg = self.requires_grad();
        self.tape.push(Rc::new(value), op, rg)
    }

    fn binary(self, other: DiffMatrix<'t>, value: DMatrix<f64>, op: Op) -> DiffMatrix<'t> {
        let rg = self.requires_grad() || other.requires_grad();
        self.tape.push(Rc::new(value), op, rg)
    }

    pub fn matmul(self, rhs: DiffMatrix<'t>) -> Result<DiffMatrix<'t>> {
        let (a, b) = (self.value(), rhs.value());
        if a.ncols() != b.nrows() {
            return Err(shape_err("matmul", a.shape(), b.shape()));
        }
        self.tape.count(a.nrows() * a.ncols() * b.ncols());
        let v = a.as_ref() * b.as_ref();
        Ok(self.binary(rhs, v, Op::MatMul(self.id, rhs.id)))
    }

    pub fn t(self) -> DiffMatrix<'t> {
        let v = self.value().transpose();
        self.unary(v, Op::Transpose(self.id))
    }

    fn same_shape(self, rhs: DiffMatrix<'t>, op: &'static str) -> Result<(Rc<DMatrix<f64>>, Rc<DMatrix<f64>>)> {
        let (a, b) = (self.value(), rhs.value());
        if a.shape() != b.shape() {
            return Err(shape_err(op, a.shape(), b.shape()));
        }
        self.tape.count(a.len());
        Ok((a, b))
    }

    pub fn add(self, rhs: DiffMatrix<'t>) -> Result<DiffMatrix<'t>> {
        let (a, b) = self.same_shape(rhs, "add")?;
        Ok(self.binary(rhs, a.as_ref() + b.as_ref(), Op::Add(self.id, rhs.id)))
    }

    pub fn sub(self, rhs: DiffMatrix<'t>) -> Result<DiffMatrix<'t>> {
        let (a, b) = self.same_shape(rhs, "sub")?;
        Ok(self.binary(rhs, a.as_ref() - b.as_ref(), Op::Sub(self.id, rhs.id)))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(self, rhs: DiffMatrix<'t>) -> Result<DiffMatrix<'t>> {
        let (a, b) = self.same_shape(rhs, "mul")?;
        Ok(self.binary(rhs, a.component_mul(b.as_ref()), Op::Mul(self.id, rhs.id)))
    }

    pub fn scale(self, s: f64) -> DiffMatrix<'t> {
        let a = self.value();
        self.tape.count(a.len());
        self.unary(a.as_ref() * s, Op::Scale(self.id, s))
    }

    pub fn sigmoid(self) -> DiffMatrix<'t> {
        let a = self.value();
        self.tape.count(a.len());
        self.unary(a.map(logistic), Op::Sigmoid(self.id))
    }

    /// Adds a `1 × c` row to every row.
    pub fn add_row(self, row: DiffMatrix<'t>) -> Result<DiffMatrix<'t>> {
        let (a, b) = (self.value(), row.value());
        if b.nrows() != 1 || b.ncols() != a.ncols() {
            return Err(shape_err("add_row", a.shape(), b.shape()));
        }
        self.tape.count(a.len());
        let mut v = a.as_ref().clone();
        for mut r in v.row_iter_mut() {
            r += b.row(0);
        }
        Ok(self.binary(row, v, Op::AddRow(self.id, row.id)))
    }

    /// Column-block concatenation `[a, b, …]`.
    pub fn concat_cols(parts: &[DiffMatrix<'t>]) -> Result<DiffMatrix<'t>> {
        let first = parts.first().ok_or(Error::EmptyMask("concat_cols"))?;
        let rows = first.shape().0;
        let values: Vec<_> = parts.iter().map(|p| p.value()).collect();
        for v in &values {
            if v.nrows() != rows {
                return Err(shape_err("concat_cols", (rows, 0), v.shape()));
            }
        }
        let cols: usize = values.iter().map(|v| v.ncols()).sum();
        let mut out = DMatrix::zeros(rows, cols);
        let mut offset = 0;
        for v in &values {
            out.columns_mut(offset, v.ncols()).copy_from(v.as_ref());
            offset += v.ncols();
        }
        let rg = parts.iter().any(|p| p.requires_grad());
        let ids = parts.iter().map(|p| p.id).collect();
        Ok(first.tape.push(Rc::new(out), Op::ConcatCols(ids), rg))
    }

    pub fn softmax_rows(self) -> DiffMatrix<'t> {
        let a = self.value();
        self.tape.count(a.len());
        self.unary(row_softmax(&a), Op::SoftmaxRows(self.id))
    }

    /// Mean of `−ln p[i, labels[i]]` over `mask`, where `self` already
    /// holds probabilities.
    pub fn cross_entropy(self, labels: &[usize], mask: &[usize]) -> Result<DiffMatrix<'t>> {
        let p = self.value();
        let targets = check_targets("cross_entropy", p.shape(), labels, mask)?;
        let loss = targets
            .iter()
            .map(|&(i, c)| -p[(i, c)].max(f64::MIN_POSITIVE).ln())
            .sum::<f64>()
            / targets.len() as f64;
        Ok(self.unary(
            DMatrix::from_element(1, 1, loss),
            Op::CrossEntropy {
                pred: self.id,
                targets,
            },
        ))
    }

    /// Softmax followed by masked cross-entropy, computed from logits with
    /// log-sum-exp so confident predictions never underflow.
    pub fn softmax_cross_entropy(self, labels: &[usize], mask: &[usize]) -> Result<DiffMatrix<'t>> {
        let z = self.value();
        let targets = check_targets("softmax_cross_entropy", z.shape(), labels, mask)?;
        let mut loss = 0.0;
        for &(i, c) in &targets {
            let row = z.row(i);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            loss += lse - z[(i, c)];
        }
        loss /= targets.len() as f64;
        Ok(self.unary(
            DMatrix::from_element(1, 1, loss),
            Op::SoftmaxCrossEntropy {
                logits: self.id,
                targets,
            },
        ))
    }

    /// Inverted dropout. Identity when `training` is false or `rate` is 0.
    pub fn dropout<R: Rng + ?Sized>(self, rate: f64, rng: &mut R, training: bool) -> Result<DiffMatrix<'t>> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!("dropout rate {rate} outside [0, 1)")));
        }
        if !training || rate == 0.0 {
            return Ok(self);
        }
        let a = self.value();
        let keep = 1.0 / (1.0 - rate);
        let mask = DMatrix::from_fn(a.nrows(), a.ncols(), |_, _| {
            if rng.random::<f64>() < rate {
                0.0
            } else {
                keep
            }
        });
        self.tape.count(a.len());
        let v = a.component_mul(&mask);
        Ok(self.unary(v, Op::Dropout { input: self.id, mask }))
    }

    pub fn sum(self) -> DiffMatrix<'t> {
        let a = self.value();
        self.tape.count(a.len());
        self.unary(DMatrix::from_element(1, 1, a.sum()), Op::Sum(self.id))
    }

    /// The single entry of a `1 × 1` matrix.
    pub fn scalar(self) -> f64 {
        self.value()[(0, 0)]
    }
}
