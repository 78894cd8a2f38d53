//! Operation-recording tape for reverse-mode differentiation.
//!
//! Every primitive appends one node holding its value and the handles of its
//! parents. Insertion order is a topological order, so the backward sweep is
//! a single reverse pass over the node list.
//!
//! The backward rules are themselves written with tape primitives. Running
//! them on the same tape yields gradients that are again differentiable
//! ([`Tape::grad`]); [`Tape::backward`] runs the same rules, reads the
//! values and truncates the tape back to its prior length.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde_json::json;

use super::sparse::SparseOperator;
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`]. Only meaningful for the tape that issued it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Constant,
    MatMul(Var, Var),
    SparseMatMul(Arc<SparseOperator>, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Scale(Var, f64),
    AddScalar(Var, f64),
    Hadamard(Var, Var),
    ScaleBy(Var, Var),
    Tanh(Var),
    Sin(Var),
    Cos(Var),
    LeakyRelu(Var, f64),
    Powf(Var, f64),
    SafeRecip(Var),
    SoftmaxRows(Var, Option<Arc<Tensor>>),
    LogSoftmaxRows(Var),
    L2Norm(Var),
    Sum(Var),
    RowSums(Var),
    ColSums(Var),
    BroadcastRows(Var, usize),
    BroadcastCols(Var, usize),
    ConcatCols(Var, Var),
    SliceCols(Var, usize, usize),
    EmbedCols(Var, usize, usize),
    Transpose(Var),
    Identity(Var),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Constant => "constant",
            Op::MatMul(..) => "matmul",
            Op::SparseMatMul(..) => "sparse_matmul",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Scale(..) => "scale",
            Op::AddScalar(..) => "add_scalar",
            Op::Hadamard(..) => "hadamard",
            Op::ScaleBy(..) => "scale_by",
            Op::Tanh(..) => "tanh",
            Op::Sin(..) => "sin",
            Op::Cos(..) => "cos",
            Op::LeakyRelu(..) => "leaky_relu",
            Op::Powf(..) => "powf",
            Op::SafeRecip(..) => "safe_recip",
            Op::SoftmaxRows(..) => "softmax_rows",
            Op::LogSoftmaxRows(..) => "log_softmax_rows",
            Op::L2Norm(..) => "l2_norm",
            Op::Sum(..) => "sum",
            Op::RowSums(..) => "row_sums",
            Op::ColSums(..) => "col_sums",
            Op::BroadcastRows(..) => "broadcast_rows",
            Op::BroadcastCols(..) => "broadcast_cols",
            Op::ConcatCols(..) => "concat_cols",
            Op::SliceCols(..) => "slice_cols",
            Op::EmbedCols(..) => "embed_cols",
            Op::Transpose(..) => "transpose",
            Op::Identity(..) => "identity",
        }
    }

    fn attributes(&self) -> serde_json::Value {
        match self {
            Op::Scale(_, c) | Op::AddScalar(_, c) => json!({ "c": c }),
            Op::LeakyRelu(_, slope) => json!({ "slope": slope }),
            Op::Powf(_, p) => json!({ "p": p }),
            Op::SoftmaxRows(_, mask) => json!({ "masked": mask.is_some() }),
            Op::BroadcastRows(_, n) => json!({ "rows": n }),
            Op::BroadcastCols(_, m) => json!({ "cols": m }),
            Op::SliceCols(_, start, end) => json!({ "start": start, "end": end }),
            Op::EmbedCols(_, offset, total) => json!({ "offset": offset, "total": total }),
            Op::SparseMatMul(s, _) => json!({ "nnz": s.matrix().nnz() }),
            _ => serde_json::Value::Null,
        }
    }

    fn parents(&self) -> Vec<Var> {
        match *self {
            Op::Leaf | Op::Constant => vec![],
            Op::MatMul(a, b)
            | Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::Hadamard(a, b)
            | Op::ScaleBy(a, b)
            | Op::ConcatCols(a, b) => vec![a, b],
            Op::SparseMatMul(_, x)
            | Op::Scale(x, _)
            | Op::AddScalar(x, _)
            | Op::Tanh(x)
            | Op::Sin(x)
            | Op::Cos(x)
            | Op::LeakyRelu(x, _)
            | Op::Powf(x, _)
            | Op::SafeRecip(x)
            | Op::SoftmaxRows(x, _)
            | Op::LogSoftmaxRows(x)
            | Op::L2Norm(x)
            | Op::Sum(x)
            | Op::RowSums(x)
            | Op::ColSums(x)
            | Op::BroadcastRows(x, _)
            | Op::BroadcastCols(x, _)
            | Op::SliceCols(x, ..)
            | Op::EmbedCols(x, ..)
            | Op::Transpose(x)
            | Op::Identity(x) => vec![x],
        }
    }
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    value: Tensor,
    requires_grad: bool,
}

/// Gradients of a scalar output with respect to the tape's leaves.
#[derive(Clone, Debug, Default)]
pub struct Gradients {
    map: BTreeMap<Var, Tensor>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.map.get(&v)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Var, &Tensor)> {
        self.map.iter().map(|(v, t)| (*v, t))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

#[derive(Clone, Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn softmax_row(row: &[f64], mask: Option<&[f64]>, out: &mut [f64]) {
    let keep = |j: usize| mask.is_none_or(|m| m[j] != 0.0);
    let max = row
        .iter()
        .enumerate()
        .filter(|(j, _)| keep(*j))
        .fold(f64::NEG_INFINITY, |m, (_, &v)| m.max(v));
    if max == f64::NEG_INFINITY {
        out.iter_mut().for_each(|o| *o = 0.0);
        return;
    }
    let mut total = 0.0;
    for (j, (o, &v)) in out.iter_mut().zip(row).enumerate() {
        *o = if keep(j) { (v - max).exp() } else { 0.0 };
        total += *o;
    }
    out.iter_mut().for_each(|o| *o /= total);
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

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Input that gradients are taken with respect to.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push_raw(Op::Leaf, value, true)
    }

    /// Identity node that is always tracked, so gradients with respect to it
    /// exist even when `x` is a constant.
    pub fn watch(&mut self, x: Var) -> Var {
        let value = self.val(x).clone();
        self.push_raw(Op::Identity(x), value, true)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push_raw(Op::Constant, value, false)
    }

    fn push_raw(&mut self, op: Op, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            op,
            value,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn push(&mut self, op: Op, value: Tensor) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::Numeric {
                op: op.name().to_string(),
            });
        }
        let requires_grad = op.parents().iter().any(|p| self.nodes[p.0].requires_grad);
        Ok(self.push_raw(op, value, requires_grad))
    }

    fn val(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.val(a).matmul(self.val(b))?;
        self.push(Op::MatMul(a, b), value)
    }

    /// `s · x` with a constant sparse `s`.
    pub fn sparse_matmul(&mut self, s: &Arc<SparseOperator>, x: Var) -> Result<Var> {
        let value = s.matrix().matmul_dense(self.val(x))?;
        self.push(Op::SparseMatMul(Arc::clone(s), x), value)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.val(a).add(self.val(b))?;
        self.push(Op::Add(a, b), value)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.val(a).sub(self.val(b))?;
        self.push(Op::Sub(a, b), value)
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Result<Var> {
        let value = self.val(x).scale(c);
        self.push(Op::Scale(x, c), value)
    }

    pub fn add_scalar(&mut self, x: Var, c: f64) -> Result<Var> {
        let value = self.val(x).map(|v| v + c);
        self.push(Op::AddScalar(x, c), value)
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.val(a).hadamard(self.val(b))?;
        self.push(Op::Hadamard(a, b), value)
    }

    /// `s · x` where `s` is a `1×1` tensor on the tape.
    pub fn scale_by(&mut self, x: Var, s: Var) -> Result<Var> {
        if self.shape(s) != (1, 1) {
            return Err(Error::dim("scale_by", format!("scale has shape {:?}", self.shape(s))));
        }
        let c = self.val(s).item();
        let value = self.val(x).scale(c);
        self.push(Op::ScaleBy(x, s), value)
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var> {
        let value = self.val(x).map(f64::tanh);
        self.push(Op::Tanh(x), value)
    }

    pub fn sin(&mut self, x: Var) -> Result<Var> {
        let value = self.val(x).map(f64::sin);
        self.push(Op::Sin(x), value)
    }

    pub fn cos(&mut self, x: Var) -> Result<Var> {
        let value = self.val(x).map(f64::cos);
        self.push(Op::Cos(x), value)
    }

    /// `max(x, 0)`; the derivative at exactly 0 is taken as 0.
    pub fn relu(&mut self, x: Var) -> Result<Var> {
        self.leaky_relu(x, 0.0)
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Result<Var> {
        let value = self.val(x).map(|v| if v > 0.0 { v } else { slope * v });
        self.push(Op::LeakyRelu(x, slope), value)
    }

    pub fn powf(&mut self, x: Var, p: f64) -> Result<Var> {
        let value = self.val(x).map(|v| v.powf(p));
        self.push(Op::Powf(x, p), value)
    }

    /// Elementwise `1/x`, with `1/0` defined as 0.
    pub fn safe_recip(&mut self, x: Var) -> Result<Var> {
        let value = self.val(x).map(|v| if v == 0.0 { 0.0 } else { 1.0 / v });
        self.push(Op::SafeRecip(x), value)
    }

    pub fn softmax_rows(&mut self, x: Var) -> Result<Var> {
        self.softmax_rows_impl(x, None)
    }

    /// Row softmax restricted to entries where `mask` is non-zero; masked
    /// entries come out as exactly 0.
    pub fn masked_softmax_rows(&mut self, x: Var, mask: &Arc<Tensor>) -> Result<Var> {
        if mask.shape() != self.shape(x) {
            return Err(Error::dim(
                "masked_softmax_rows",
                format!("mask {:?} vs input {:?}", mask.shape(), self.shape(x)),
            ));
        }
        self.softmax_rows_impl(x, Some(Arc::clone(mask)))
    }

    fn softmax_rows_impl(&mut self, x: Var, mask: Option<Arc<Tensor>>) -> Result<Var> {
        let input = self.val(x);
        let mut value = Tensor::zeros(input.rows(), input.cols());
        for i in 0..input.rows() {
            let m = mask.as_ref().map(|m| m.row(i));
            softmax_row(input.row(i), m, value.row_mut(i));
        }
        self.push(Op::SoftmaxRows(x, mask), value)
    }

    pub fn log_softmax_rows(&mut self, x: Var) -> Result<Var> {
        let input = self.val(x);
        let mut value = input.clone();
        for i in 0..input.rows() {
            let row = input.row(i);
            let max = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            value.row_mut(i).iter_mut().for_each(|v| *v -= lse);
        }
        self.push(Op::LogSoftmaxRows(x), value)
    }

    /// Frobenius / Euclidean norm as a `1×1` tensor.
    pub fn l2_norm(&mut self, x: Var) -> Result<Var> {
        let value = Tensor::scalar(self.val(x).norm());
        self.push(Op::L2Norm(x), value)
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let value = Tensor::scalar(self.val(x).sum());
        self.push(Op::Sum(x), value)
    }

    pub fn row_sums(&mut self, x: Var) -> Result<Var> {
        let value = self.val(x).row_sums();
        self.push(Op::RowSums(x), value)
    }

    pub fn col_sums(&mut self, x: Var) -> Result<Var> {
        let value = self.val(x).col_sums();
        self.push(Op::ColSums(x), value)
    }

    /// Repeats a `1×m` row `n` times.
    pub fn broadcast_rows(&mut self, x: Var, n: usize) -> Result<Var> {
        let (r, _) = self.shape(x);
        if r != 1 {
            return Err(Error::dim("broadcast_rows", format!("expected 1 row, got {r}")));
        }
        let src = self.val(x);
        let value = Tensor::from_fn(n, src.cols(), |_, j| src.get(0, j));
        self.push(Op::BroadcastRows(x, n), value)
    }

    /// Repeats an `n×1` column `m` times.
    pub fn broadcast_cols(&mut self, x: Var, m: usize) -> Result<Var> {
        let (_, c) = self.shape(x);
        if c != 1 {
            return Err(Error::dim("broadcast_cols", format!("expected 1 column, got {c}")));
        }
        let src = self.val(x);
        let value = Tensor::from_fn(src.rows(), m, |i, _| src.get(i, 0));
        self.push(Op::BroadcastCols(x, m), value)
    }

    /// Adds a `1×m` row vector to every row of `x`.
    pub fn add_row_vector(&mut self, x: Var, row: Var) -> Result<Var> {
        let n = self.shape(x).0;
        let b = self.broadcast_rows(row, n)?;
        self.add(x, b)
    }

    /// Scales row `i` of `x` by `col[i]` for an `n×1` column.
    pub fn scale_rows(&mut self, x: Var, col: Var) -> Result<Var> {
        let m = self.shape(x).1;
        let b = self.broadcast_cols(col, m)?;
        self.hadamard(x, b)
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.val(a).concat_cols(self.val(b))?;
        self.push(Op::ConcatCols(a, b), value)
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, end: usize) -> Result<Var> {
        let value = self.val(x).slice_cols(start, end)?;
        self.push(Op::SliceCols(x, start, end), value)
    }

    /// Places `x` at column `offset` of a zero matrix with `total` columns.
    pub fn embed_cols(&mut self, x: Var, offset: usize, total: usize) -> Result<Var> {
        let src = self.val(x);
        if offset + src.cols() > total {
            return Err(Error::dim(
                "embed_cols",
                format!("{} columns at offset {offset} exceed {total}", src.cols()),
            ));
        }
        let mut value = Tensor::zeros(src.rows(), total);
        for i in 0..src.rows() {
            value.row_mut(i)[offset..offset + src.cols()].copy_from_slice(src.row(i));
        }
        self.push(Op::EmbedCols(x, offset, total), value)
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let value = self.val(x).transpose();
        self.push(Op::Transpose(x), value)
    }

    /// A distinct node with the same value as `x`.
    pub fn identity(&mut self, x: Var) -> Result<Var> {
        let value = self.val(x).clone();
        self.push(Op::Identity(x), value)
    }

    /// Vector-Jacobian products of node `node` for upstream gradient `g`,
    /// recorded on the tape.
    fn vjp(&mut self, node: Var, g: Var) -> Result<Vec<(Var, Var)>> {
        let op = self.nodes[node.0].op.clone();
        let y = node;
        Ok(match op {
            Op::Leaf | Op::Constant => vec![],
            Op::MatMul(a, b) => {
                let bt = self.transpose(b)?;
                let at = self.transpose(a)?;
                vec![(a, self.matmul(g, bt)?), (b, self.matmul(at, g)?)]
            }
            Op::SparseMatMul(s, x) => {
                let st = Arc::new(s.transposed());
                vec![(x, self.sparse_matmul(&st, g)?)]
            }
            Op::Add(a, b) => vec![(a, g), (b, g)],
            Op::Sub(a, b) => vec![(a, g), (b, self.scale(g, -1.0)?)],
            Op::Scale(x, c) => vec![(x, self.scale(g, c)?)],
            Op::AddScalar(x, _) | Op::Identity(x) => vec![(x, g)],
            Op::Hadamard(a, b) => vec![(a, self.hadamard(g, b)?), (b, self.hadamard(g, a)?)],
            Op::ScaleBy(x, s) => {
                let gx = self.scale_by(g, s)?;
                let gs = self.hadamard(g, x)?;
                vec![(x, gx), (s, self.sum(gs)?)]
            }
            Op::Tanh(x) => {
                let y2 = self.hadamard(y, y)?;
                let neg = self.scale(y2, -1.0)?;
                let d = self.add_scalar(neg, 1.0)?;
                vec![(x, self.hadamard(g, d)?)]
            }
            Op::Sin(x) => {
                let c = self.cos(x)?;
                vec![(x, self.hadamard(g, c)?)]
            }
            Op::Cos(x) => {
                let s = self.sin(x)?;
                let gs = self.hadamard(g, s)?;
                vec![(x, self.scale(gs, -1.0)?)]
            }
            Op::LeakyRelu(x, slope) => {
                let mask = self.val(x).map(|v| if v > 0.0 { 1.0 } else { slope });
                let m = self.constant(mask);
                vec![(x, self.hadamard(g, m)?)]
            }
            Op::Powf(x, p) => {
                let d = self.powf(x, p - 1.0)?;
                let d = self.scale(d, p)?;
                vec![(x, self.hadamard(g, d)?)]
            }
            Op::SafeRecip(x) => {
                let y2 = self.hadamard(y, y)?;
                let d = self.scale(y2, -1.0)?;
                vec![(x, self.hadamard(g, d)?)]
            }
            Op::SoftmaxRows(x, _) => {
                let m = self.shape(x).1;
                let gy = self.hadamard(g, y)?;
                let rs = self.row_sums(gy)?;
                let rs = self.broadcast_cols(rs, m)?;
                let centered = self.sub(g, rs)?;
                vec![(x, self.hadamard(y, centered)?)]
            }
            Op::LogSoftmaxRows(x) => {
                let m = self.shape(x).1;
                let sm = self.softmax_rows(x)?;
                let rs = self.row_sums(g)?;
                let rs = self.broadcast_cols(rs, m)?;
                let w = self.hadamard(sm, rs)?;
                vec![(x, self.sub(g, w)?)]
            }
            Op::L2Norm(x) => {
                let inv = self.safe_recip(y)?;
                let s = self.hadamard(g, inv)?;
                vec![(x, self.scale_by(x, s)?)]
            }
            Op::Sum(x) => {
                let (n, m) = self.shape(x);
                let col = self.broadcast_rows(g, n)?;
                vec![(x, self.broadcast_cols(col, m)?)]
            }
            Op::RowSums(x) => {
                let m = self.shape(x).1;
                vec![(x, self.broadcast_cols(g, m)?)]
            }
            Op::ColSums(x) => {
                let n = self.shape(x).0;
                vec![(x, self.broadcast_rows(g, n)?)]
            }
            Op::BroadcastRows(x, _) => vec![(x, self.col_sums(g)?)],
            Op::BroadcastCols(x, _) => vec![(x, self.row_sums(g)?)],
            Op::ConcatCols(a, b) => {
                let wa = self.shape(a).1;
                let wb = self.shape(b).1;
                vec![(a, self.slice_cols(g, 0, wa)?), (b, self.slice_cols(g, wa, wa + wb)?)]
            }
            Op::SliceCols(x, start, _) => {
                let total = self.shape(x).1;
                vec![(x, self.embed_cols(g, start, total)?)]
            }
            Op::EmbedCols(x, offset, _) => {
                let w = self.shape(x).1;
                vec![(x, self.slice_cols(g, offset, offset + w)?)]
            }
            Op::Transpose(x) => vec![(x, self.transpose(g)?)],
        })
    }

    /// Differentiable gradients of the scalar `output` with respect to `wrt`.
    ///
    /// The returned handles live on this tape, so they can take part in
    /// further computation and be differentiated again. Each `wrt` node is
    /// treated as an independent input: gradient is not propagated through
    /// it to its own ancestors. Nodes without a path to `output` receive an
    /// explicit zero.
    pub fn grad(&mut self, output: Var, wrt: &[Var]) -> Result<Vec<Var>> {
        if self.shape(output) != (1, 1) {
            return Err(Error::Contract(format!(
                "backward requires a 1x1 output, got {:?}",
                self.shape(output)
            )));
        }
        let stop = wrt.iter().map(|v| v.0).min().unwrap_or(0);
        let mut is_target = vec![false; output.0 + 1];
        for v in wrt {
            if v.0 <= output.0 {
                is_target[v.0] = true;
            }
        }
        let mut acc: Vec<Option<Var>> = vec![None; output.0 + 1];
        acc[output.0] = Some(self.constant(Tensor::scalar(1.0)));
        let mut found: BTreeMap<usize, Var> = BTreeMap::new();

        for i in (stop..=output.0).rev() {
            let Some(g) = acc[i].take() else { continue };
            if is_target[i] {
                found.insert(i, g);
                continue;
            }
            if !self.nodes[i].requires_grad {
                continue;
            }
            for (parent, contrib) in self.vjp(Var(i), g)? {
                if parent.0 < stop && !is_target.get(parent.0).copied().unwrap_or(false) {
                    continue;
                }
                acc[parent.0] = Some(match acc[parent.0] {
                    Some(prev) => self.add(prev, contrib)?,
                    None => contrib,
                });
            }
        }

        wrt.iter()
            .map(|v| match found.get(&v.0) {
                Some(g) => Ok(*g),
                None => {
                    let (r, c) = self.shape(*v);
                    Ok(self.constant(Tensor::zeros(r, c)))
                }
            })
            .collect()
    }

    /// Gradient values of `output` with respect to `wrt`; the tape is left
    /// exactly as it was.
    pub fn backward_wrt(&mut self, output: Var, wrt: &[Var]) -> Result<Vec<Tensor>> {
        let mark = self.nodes.len();
        let result = self
            .grad(output, wrt)
            .map(|gs| gs.iter().map(|g| self.value(*g).clone()).collect());
        self.nodes.truncate(mark);
        result
    }

    /// Gradient of `output` with respect to every leaf on the tape.
    pub fn backward(&mut self, output: Var) -> Result<Gradients> {
        let leaves: Vec<Var> = self
            .nodes
            .iter()
            .enumerate()
            .filter(|(i, n)| matches!(n.op, Op::Leaf) && *i <= output.0)
            .map(|(i, _)| Var(i))
            .collect();
        let values = self.backward_wrt(output, &leaves)?;
        Ok(Gradients {
            map: leaves.into_iter().zip(values).collect(),
        })
    }

    /// JSON description of the recorded nodes, for debugging.
    pub fn dump_json(&self) -> serde_json::Value {
        let nodes: Vec<_> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| {
                json!({
                    "id": i,
                    "op": n.op.name(),
                    "attributes": n.op.attributes(),
                    "parents": n.op.parents().iter().map(|p| p.0).collect::<Vec<_>>(),
                    "shape": [n.value.rows(), n.value.cols()],
                    "requires_grad": n.requires_grad,
                })
            })
            .collect();
        json!({ "nodes": nodes })
    }
}
