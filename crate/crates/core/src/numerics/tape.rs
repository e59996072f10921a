use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use super::tensor::{gemm_acc, gemm_nt_acc, gemm_tn_acc};
use super::{ParamId, ParamStore, Tensor};
use crate::error::{Error, Result};
use crate::math;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var {
    index: usize,
    generation: u32,
}

/// Local backward rule of an operation recorded with [`Tape::custom`].
///
/// `grads_in[i]` is zero-initialised with the length of `inputs[i]`; the rule
/// adds `∂out/∂input · grad_out` into it.
pub trait BackwardRule: fmt::Debug {
    fn backward(
        &self,
        inputs: &[&Tensor],
        output: &Tensor,
        grad_out: &[f64],
        grads_in: &mut [Vec<f64>],
    );
}

#[derive(Debug)]
enum Op {
    Leaf,
    Param,
    MatMul(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    AddBias(usize, usize),
    Sigmoid(usize),
    Tanh(usize),
    Concat(usize, usize),
    SliceCols(usize, usize),
    SliceRows(usize, usize),
    StackRows(Vec<usize>),
    Transpose(usize),
    MaskedSoftmax(usize),
    LogSumExp(usize),
    Sum(usize),
    Gather(usize, Vec<usize>),
    Custom(Vec<usize>, Box<dyn BackwardRule>),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
    grad: Option<Vec<f64>>,
}

/// Computation record: values in recording order plus their backward rules.
///
/// Recording order is a topological order, so [`Tape::backward`] visits each
/// record once, in reverse. Gradients of leaves accumulate across backward
/// passes until taken or the record is cleared.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: BTreeMap<ParamId, usize>,
    generation: u32,
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

    /// Drops every record. Existing [`Var`]s become stale.
    pub fn clear(&mut self) {
        self.nodes.clear();
        self.params.clear();
        self.generation = self.generation.wrapping_add(1);
    }

    fn idx(&self, v: Var) -> Result<usize> {
        if v.generation != self.generation || v.index >= self.nodes.len() {
            return Err(Error::StaleVariable);
        }
        Ok(v.index)
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
            grad: None,
        });
        Var {
            index: self.nodes.len() - 1,
            generation: self.generation,
        }
    }

    fn rg(&self, i: usize) -> bool {
        self.nodes[i].requires_grad
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[self.idx(v).expect("stale variable")].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.value(v).shape()
    }

    /// Accumulated gradient of a leaf, if any backward pass reached it.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        let i = self.idx(v).ok()?;
        self.nodes[i].grad.as_deref()
    }

    pub fn zero_grad(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
    }

    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, false)
    }

    pub fn variable(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, true)
    }

    /// Leaf bound to a stored parameter; repeated calls reuse one record.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(&i) = self.params.get(&id) {
            return Var {
                index: i,
                generation: self.generation,
            };
        }
        let v = self.push(store.value(id).clone(), Op::Param, true);
        self.params.insert(id, v.index);
        v
    }

    /// Moves accumulated parameter gradients into `store`, adding to its
    /// accumulators, and resets them on the tape.
    pub fn flush_param_grads(&mut self, store: &mut ParamStore) {
        for (&id, &i) in &self.params {
            if let Some(g) = self.nodes[i].grad.take() {
                let acc = store.get_mut(id).grad.data_mut();
                for (a, b) in acc.iter_mut().zip(g) {
                    *a += b;
                }
            }
        }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ia, ib) = (self.idx(a)?, self.idx(b)?);
        let (ta, tb) = (&self.nodes[ia].value, &self.nodes[ib].value);
        if ta.rank() != 2 || tb.rank() != 2 || ta.shape()[1] != tb.shape()[0] {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                left: ta.shape().to_vec(),
                right: tb.shape().to_vec(),
            });
        }
        let (m, k, n) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
        let mut out = vec![0.0; m * n];
        gemm_acc(ta.data(), tb.data(), &mut out, m, k, n);
        let rg = self.rg(ia) || self.rg(ib);
        Ok(self.push(Tensor::new(vec![m, n], out)?, Op::MatMul(ia, ib), rg))
    }

    fn same_shape(&self, op: &'static str, ia: usize, ib: usize) -> Result<()> {
        let (sa, sb) = (self.nodes[ia].value.shape(), self.nodes[ib].value.shape());
        if sa != sb {
            return Err(Error::ShapeMismatch {
                op,
                left: sa.to_vec(),
                right: sb.to_vec(),
            });
        }
        Ok(())
    }

    fn zip_map(&mut self, op: &'static str, a: Var, b: Var, f: fn(f64, f64) -> f64) -> Result<(Tensor, usize, usize)> {
        let (ia, ib) = (self.idx(a)?, self.idx(b)?);
        self.same_shape(op, ia, ib)?;
        let (ta, tb) = (&self.nodes[ia].value, &self.nodes[ib].value);
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| f(*x, *y)).collect();
        Ok((Tensor::new(ta.shape().to_vec(), data)?, ia, ib))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (t, ia, ib) = self.zip_map("add", a, b, |x, y| x + y)?;
        let rg = self.rg(ia) || self.rg(ib);
        Ok(self.push(t, Op::Add(ia, ib), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let (t, ia, ib) = self.zip_map("sub", a, b, |x, y| x - y)?;
        let rg = self.rg(ia) || self.rg(ib);
        Ok(self.push(t, Op::Sub(ia, ib), rg))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (t, ia, ib) = self.zip_map("mul", a, b, |x, y| x * y)?;
        let rg = self.rg(ia) || self.rg(ib);
        Ok(self.push(t, Op::Mul(ia, ib), rg))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Result<Var> {
        let ia = self.idx(a)?;
        let ta = &self.nodes[ia].value;
        let data = ta.data().iter().map(|x| x * factor).collect();
        let t = Tensor::new(ta.shape().to_vec(), data)?;
        let rg = self.rg(ia);
        Ok(self.push(t, Op::Scale(ia, factor), rg))
    }

    /// Adds vector `bias[n]` to every row of `a[m, n]`.
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (ia, ib) = (self.idx(a)?, self.idx(bias)?);
        let (ta, tb) = (&self.nodes[ia].value, &self.nodes[ib].value);
        if tb.rank() != 1 || ta.cols() != tb.len() {
            return Err(Error::ShapeMismatch {
                op: "add_bias",
                left: ta.shape().to_vec(),
                right: tb.shape().to_vec(),
            });
        }
        let n = tb.len();
        let mut data = ta.data().to_vec();
        for row in data.chunks_mut(n.max(1)) {
            for (x, b) in row.iter_mut().zip(tb.data()) {
                *x += b;
            }
        }
        let t = Tensor::new(ta.shape().to_vec(), data)?;
        let rg = self.rg(ia) || self.rg(ib);
        Ok(self.push(t, Op::AddBias(ia, ib), rg))
    }

    fn map(&mut self, a: Var, f: fn(f64) -> f64) -> Result<(Tensor, usize)> {
        let ia = self.idx(a)?;
        let ta = &self.nodes[ia].value;
        let data = ta.data().iter().map(|x| f(*x)).collect();
        Ok((Tensor::new(ta.shape().to_vec(), data)?, ia))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let (t, ia) = self.map(a, math::sigmoid)?;
        let rg = self.rg(ia);
        Ok(self.push(t, Op::Sigmoid(ia), rg))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        let (t, ia) = self.map(a, math::tanh)?;
        let rg = self.rg(ia);
        Ok(self.push(t, Op::Tanh(ia), rg))
    }

    /// Feature-axis concatenation of `a[T, d1]` and `b[T, d2]`.
    pub fn concat(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ia, ib) = (self.idx(a)?, self.idx(b)?);
        let (ta, tb) = (&self.nodes[ia].value, &self.nodes[ib].value);
        if ta.rank() != tb.rank() || ta.rank() == 0 || ta.rows() != tb.rows() {
            return Err(Error::ShapeMismatch {
                op: "concat",
                left: ta.shape().to_vec(),
                right: tb.shape().to_vec(),
            });
        }
        let (rows, ca, cb) = (ta.rows(), ta.cols(), tb.cols());
        let mut data = Vec::with_capacity(rows * (ca + cb));
        for r in 0..rows {
            data.extend_from_slice(&ta.data()[r * ca..(r + 1) * ca]);
            data.extend_from_slice(&tb.data()[r * cb..(r + 1) * cb]);
        }
        let shape = if ta.rank() == 1 {
            vec![ca + cb]
        } else {
            vec![rows, ca + cb]
        };
        let t = Tensor::new(shape, data)?;
        let rg = self.rg(ia) || self.rg(ib);
        Ok(self.push(t, Op::Concat(ia, ib), rg))
    }

    /// Columns `start..end` of `a`.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let ia = self.idx(a)?;
        let ta = &self.nodes[ia].value;
        let c = ta.cols();
        if ta.rank() == 0 || start > end || end > c {
            return Err(Error::invalid(
                "slice_cols",
                alloc::format!("range {start}..{end} outside width {c}"),
            ));
        }
        let rows = ta.rows();
        let mut data = Vec::with_capacity(rows * (end - start));
        for r in 0..rows {
            data.extend_from_slice(&ta.data()[r * c + start..r * c + end]);
        }
        let shape = if ta.rank() == 1 {
            vec![end - start]
        } else {
            vec![rows, end - start]
        };
        let t = Tensor::new(shape, data)?;
        let rg = self.rg(ia);
        Ok(self.push(t, Op::SliceCols(ia, start), rg))
    }

    /// Rows `start..end` of matrix `a`.
    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let ia = self.idx(a)?;
        let ta = &self.nodes[ia].value;
        if ta.rank() != 2 || start > end || end > ta.rows() {
            return Err(Error::invalid(
                "slice_rows",
                alloc::format!("range {start}..{end} outside {:?}", ta.shape()),
            ));
        }
        let t = ta.slice_rows(start, end);
        let rg = self.rg(ia);
        Ok(self.push(t, Op::SliceRows(ia, start), rg))
    }

    /// Stacks `[1, n]` rows (or `[n]` vectors) into an `[R, n]` matrix.
    pub fn stack_rows(&mut self, rows: &[Var]) -> Result<Var> {
        if rows.is_empty() {
            return Err(Error::Empty { op: "stack_rows" });
        }
        let idx: Vec<usize> = rows.iter().map(|v| self.idx(*v)).collect::<Result<_>>()?;
        let width = self.nodes[idx[0]].value.len();
        let mut data = Vec::with_capacity(width * idx.len());
        for &i in &idx {
            let t = &self.nodes[i].value;
            if t.len() != width || t.rows() != 1 {
                return Err(Error::ShapeMismatch {
                    op: "stack_rows",
                    left: vec![1, width],
                    right: t.shape().to_vec(),
                });
            }
            data.extend_from_slice(t.data());
        }
        let t = Tensor::new(vec![idx.len(), width], data)?;
        let rg = idx.iter().any(|&i| self.rg(i));
        Ok(self.push(t, Op::StackRows(idx), rg))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let ia = self.idx(a)?;
        let ta = &self.nodes[ia].value;
        if ta.rank() != 2 {
            return Err(Error::invalid("transpose", "expected a matrix"));
        }
        let t = ta.transpose();
        let rg = self.rg(ia);
        Ok(self.push(t, Op::Transpose(ia), rg))
    }

    /// Row-wise softmax over the trailing axis restricted to unmasked
    /// columns; masked entries are exactly zero.
    pub fn masked_softmax(&mut self, scores: Var, mask: &[bool]) -> Result<Var> {
        let ia = self.idx(scores)?;
        let ta = &self.nodes[ia].value;
        if ta.rank() == 0 || mask.len() != ta.cols() {
            return Err(Error::ShapeMismatch {
                op: "masked_softmax",
                left: ta.shape().to_vec(),
                right: vec![mask.len()],
            });
        }
        if !mask.iter().any(|m| *m) {
            return Err(Error::AllMasked {
                op: "masked_softmax",
            });
        }
        let c = ta.cols();
        let mut data = vec![0.0; ta.len()];
        for (src, dst) in ta.data().chunks(c).zip(data.chunks_mut(c)) {
            softmax_row(src, mask, dst);
        }
        let t = Tensor::new(ta.shape().to_vec(), data)?;
        let rg = self.rg(ia);
        Ok(self.push(t, Op::MaskedSoftmax(ia), rg))
    }

    /// `ln Σ exp(v)` over every entry, max-shifted.
    pub fn logsumexp(&mut self, v: Var) -> Result<Var> {
        let ia = self.idx(v)?;
        let ta = &self.nodes[ia].value;
        if ta.is_empty() {
            return Err(Error::Empty { op: "logsumexp" });
        }
        let t = Tensor::scalar(math::log_sum_exp(ta.data()));
        let rg = self.rg(ia);
        Ok(self.push(t, Op::LogSumExp(ia), rg))
    }

    pub fn sum(&mut self, v: Var) -> Result<Var> {
        let ia = self.idx(v)?;
        let t = Tensor::scalar(self.nodes[ia].value.data().iter().sum());
        let rg = self.rg(ia);
        Ok(self.push(t, Op::Sum(ia), rg))
    }

    /// Sums a list of scalars.
    pub fn add_all(&mut self, vars: &[Var]) -> Result<Var> {
        let mut iter = vars.iter();
        let first = *iter.next().ok_or(Error::Empty { op: "add_all" })?;
        iter.try_fold(first, |acc, v| self.add(acc, *v))
    }

    /// Selects rows of `table[V, D]` by index.
    pub fn gather_rows(&mut self, table: Var, indices: &[usize]) -> Result<Var> {
        let ia = self.idx(table)?;
        let ta = &self.nodes[ia].value;
        if ta.rank() != 2 {
            return Err(Error::invalid("gather_rows", "table must be a matrix"));
        }
        let (v, d) = (ta.rows(), ta.cols());
        let mut data = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            if i >= v {
                return Err(Error::IndexOutOfRange {
                    what: "embedding table",
                    index: i,
                    size: v,
                });
            }
            data.extend_from_slice(ta.row(i));
        }
        let t = Tensor::new(vec![indices.len(), d], data)?;
        let rg = self.rg(ia);
        Ok(self.push(t, Op::Gather(ia, indices.to_vec()), rg))
    }

    /// Records an operation whose value was computed by the caller.
    pub fn custom(&mut self, inputs: &[Var], output: Tensor, rule: Box<dyn BackwardRule>) -> Result<Var> {
        let idx: Vec<usize> = inputs.iter().map(|v| self.idx(*v)).collect::<Result<_>>()?;
        let rg = idx.iter().any(|&i| self.rg(i));
        Ok(self.push(output, Op::Custom(idx, rule), rg))
    }

    /// Reverse sweep from a scalar `loss`, accumulating into leaf gradients.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let root = self.idx(loss)?;
        if self.nodes[root].value.len() != 1 {
            return Err(Error::NonScalarLoss(self.nodes[root].value.shape().to_vec()));
        }
        let mut adj: Vec<Option<Vec<f64>>> = Vec::new();
        adj.resize_with(root + 1, || None);
        adj[root] = Some(vec![1.0]);

        for i in (0..=root).rev() {
            let Some(g) = adj[i].take() else { continue };
            if !self.nodes[i].requires_grad {
                continue;
            }
            self.propagate(i, &g, &mut adj);
            if matches!(self.nodes[i].op, Op::Leaf | Op::Param) {
                match &mut self.nodes[i].grad {
                    Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
                    slot => *slot = Some(g),
                }
            }
        }
        Ok(())
    }

    fn propagate(&self, i: usize, g: &[f64], adj: &mut [Option<Vec<f64>>]) {
        let nodes = &self.nodes;
        let out = &nodes[i].value;
        match &nodes[i].op {
            Op::Leaf | Op::Param => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (&nodes[*a].value, &nodes[*b].value);
                let (m, k, n) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
                if let Some(ga) = slot(nodes, adj, *a) {
                    gemm_nt_acc(g, tb.data(), ga, m, n, k);
                }
                if let Some(gb) = slot(nodes, adj, *b) {
                    gemm_tn_acc(ta.data(), g, gb, m, k, n);
                }
            }
            Op::Add(a, b) => {
                for (j, sign) in [(*a, 1.0), (*b, 1.0)] {
                    if let Some(gj) = slot(nodes, adj, j) {
                        gj.iter_mut().zip(g).for_each(|(x, y)| *x += sign * y);
                    }
                }
            }
            Op::Sub(a, b) => {
                for (j, sign) in [(*a, 1.0), (*b, -1.0)] {
                    if let Some(gj) = slot(nodes, adj, j) {
                        gj.iter_mut().zip(g).for_each(|(x, y)| *x += sign * y);
                    }
                }
            }
            Op::Mul(a, b) => {
                let (va, vb) = (nodes[*a].value.data(), nodes[*b].value.data());
                if let Some(ga) = slot(nodes, adj, *a) {
                    for ((x, y), z) in ga.iter_mut().zip(g).zip(vb) {
                        *x += y * z;
                    }
                }
                if let Some(gb) = slot(nodes, adj, *b) {
                    for ((x, y), z) in gb.iter_mut().zip(g).zip(va) {
                        *x += y * z;
                    }
                }
            }
            Op::Scale(a, f) => {
                if let Some(ga) = slot(nodes, adj, *a) {
                    ga.iter_mut().zip(g).for_each(|(x, y)| *x += f * y);
                }
            }
            Op::AddBias(a, b) => {
                if let Some(ga) = slot(nodes, adj, *a) {
                    ga.iter_mut().zip(g).for_each(|(x, y)| *x += y);
                }
                if let Some(gb) = slot(nodes, adj, *b) {
                    let n = gb.len().max(1);
                    for row in g.chunks(n) {
                        gb.iter_mut().zip(row).for_each(|(x, y)| *x += y);
                    }
                }
            }
            Op::Sigmoid(a) => {
                if let Some(ga) = slot(nodes, adj, *a) {
                    for ((x, y), s) in ga.iter_mut().zip(g).zip(out.data()) {
                        *x += y * s * (1.0 - s);
                    }
                }
            }
            Op::Tanh(a) => {
                if let Some(ga) = slot(nodes, adj, *a) {
                    for ((x, y), t) in ga.iter_mut().zip(g).zip(out.data()) {
                        *x += y * (1.0 - t * t);
                    }
                }
            }
            Op::Concat(a, b) => {
                let (ca, cb) = (nodes[*a].value.cols(), nodes[*b].value.cols());
                let w = ca + cb;
                if let Some(ga) = slot(nodes, adj, *a) {
                    for (r, dst) in ga.chunks_mut(ca.max(1)).enumerate().take(out.rows()) {
                        dst.iter_mut().zip(&g[r * w..r * w + ca]).for_each(|(x, y)| *x += y);
                    }
                }
                if let Some(gb) = slot(nodes, adj, *b) {
                    for (r, dst) in gb.chunks_mut(cb.max(1)).enumerate().take(out.rows()) {
                        dst.iter_mut()
                            .zip(&g[r * w + ca..(r + 1) * w])
                            .for_each(|(x, y)| *x += y);
                    }
                }
            }
            Op::SliceCols(a, start) => {
                let c = nodes[*a].value.cols();
                let width = out.cols();
                if let Some(ga) = slot(nodes, adj, *a) {
                    for r in 0..out.rows() {
                        let dst = &mut ga[r * c + start..r * c + start + width];
                        dst.iter_mut()
                            .zip(&g[r * width..(r + 1) * width])
                            .for_each(|(x, y)| *x += y);
                    }
                }
            }
            Op::SliceRows(a, start) => {
                let c = nodes[*a].value.cols();
                if let Some(ga) = slot(nodes, adj, *a) {
                    let dst = &mut ga[start * c..start * c + g.len()];
                    dst.iter_mut().zip(g).for_each(|(x, y)| *x += y);
                }
            }
            Op::StackRows(rows) => {
                let w = out.cols();
                for (r, &j) in rows.iter().enumerate() {
                    if let Some(gj) = slot(nodes, adj, j) {
                        gj.iter_mut()
                            .zip(&g[r * w..(r + 1) * w])
                            .for_each(|(x, y)| *x += y);
                    }
                }
            }
            Op::Transpose(a) => {
                let (r, c) = (nodes[*a].value.rows(), nodes[*a].value.cols());
                if let Some(ga) = slot(nodes, adj, *a) {
                    for p in 0..r {
                        for q in 0..c {
                            ga[p * c + q] += g[q * r + p];
                        }
                    }
                }
            }
            Op::MaskedSoftmax(a) => {
                let c = out.cols();
                if let Some(ga) = slot(nodes, adj, *a) {
                    for ((y, gy), dx) in out.data().chunks(c).zip(g.chunks(c)).zip(ga.chunks_mut(c)) {
                        let dot: f64 = y.iter().zip(gy).map(|(p, q)| p * q).sum();
                        for k in 0..c {
                            dx[k] += y[k] * (gy[k] - dot);
                        }
                    }
                }
            }
            Op::LogSumExp(a) => {
                let lse = out.data()[0];
                let va = nodes[*a].value.data();
                if let Some(ga) = slot(nodes, adj, *a) {
                    for (x, v) in ga.iter_mut().zip(va) {
                        *x += g[0] * math::exp(v - lse);
                    }
                }
            }
            Op::Sum(a) => {
                if let Some(ga) = slot(nodes, adj, *a) {
                    ga.iter_mut().for_each(|x| *x += g[0]);
                }
            }
            Op::Gather(a, indices) => {
                let d = nodes[*a].value.cols();
                if let Some(ga) = slot(nodes, adj, *a) {
                    for (r, &row) in indices.iter().enumerate() {
                        let dst = &mut ga[row * d..(row + 1) * d];
                        dst.iter_mut()
                            .zip(&g[r * d..(r + 1) * d])
                            .for_each(|(x, y)| *x += y);
                    }
                }
            }
            Op::Custom(inputs, rule) => {
                let values: Vec<&Tensor> = inputs.iter().map(|&j| &nodes[j].value).collect();
                let mut grads: Vec<Vec<f64>> = values.iter().map(|t| vec![0.0; t.len()]).collect();
                rule.backward(&values, out, g, &mut grads);
                for (&j, gj) in inputs.iter().zip(grads) {
                    if let Some(dst) = slot(nodes, adj, j) {
                        dst.iter_mut().zip(gj).for_each(|(x, y)| *x += y);
                    }
                }
            }
        }
    }
}

fn slot<'a>(nodes: &[Node], adj: &'a mut [Option<Vec<f64>>], j: usize) -> Option<&'a mut Vec<f64>> {
    if !nodes[j].requires_grad {
        return None;
    }
    Some(adj[j].get_or_insert_with(|| vec![0.0; nodes[j].value.len()]))
}

fn softmax_row(src: &[f64], mask: &[bool], dst: &mut [f64]) {
    let max = src
        .iter()
        .zip(mask)
        .filter(|(_, m)| **m)
        .map(|(x, _)| *x)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for ((x, m), y) in src.iter().zip(mask).zip(dst.iter_mut()) {
        *y = if *m { math::exp(x - max) } else { 0.0 };
        total += *y;
    }
    dst.iter_mut().for_each(|y| *y /= total);
}

/// Softmax restricted to unmasked positions, outside any record.
pub fn masked_softmax(scores: &[f64], mask: &[bool]) -> Result<Vec<f64>> {
    if scores.len() != mask.len() {
        return Err(Error::LengthMismatch {
            left: scores.len(),
            right: mask.len(),
        });
    }
    if !mask.iter().any(|m| *m) {
        return Err(Error::AllMasked {
            op: "masked_softmax",
        });
    }
    let mut out = vec![0.0; scores.len()];
    softmax_row(scores, mask, &mut out);
    Ok(out)
}

/// `ln Σ exp(v)` outside any record.
pub fn logsumexp(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty { op: "logsumexp" });
    }
    Ok(math::log_sum_exp(values))
}
