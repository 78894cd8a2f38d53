use std::sync::Arc;

use rand::Rng;

use super::params::{BoundParams, ParamId, ParamStore};
use crate::autodiff::{SparseOperator, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::graph::{gcn_adjacency, normalize_adjacency, Graph, NormMode};

/// Graph-derived operators shared by every layer and flow on one graph.
#[derive(Clone, Debug)]
pub struct GraphContext {
    pub graph: Graph,
    /// `D̃^{-1/2}(W+I)D̃^{-1/2}`.
    pub gcn: Arc<SparseOperator>,
    /// `D⁻¹W`.
    pub row: Arc<SparseOperator>,
    /// `WD⁻¹`.
    pub column: Arc<SparseOperator>,
    /// `D^{-1/2}WD^{-1/2}`.
    pub symmetric: Arc<SparseOperator>,
    /// 1 where `W[i,j] > 0` or `i == j`, else 0.
    pub support: Arc<Tensor>,
}

impl GraphContext {
    pub fn new(graph: &Graph) -> Self {
        let n = graph.num_nodes();
        let mut support = Tensor::identity(n);
        for (i, j, w) in graph.adjacency().triplets() {
            if w > 0.0 {
                support.set(i, j, 1.0);
            }
        }
        let op = |mode| Arc::new(SparseOperator::new(normalize_adjacency(graph, mode)));
        Self {
            graph: graph.clone(),
            gcn: Arc::new(SparseOperator::new(gcn_adjacency(graph))),
            row: op(NormMode::Row),
            column: op(NormMode::Column),
            symmetric: op(NormMode::Symmetric),
            support: Arc::new(support),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }

    pub fn normalized(&self, mode: NormMode) -> &Arc<SparseOperator> {
        match mode {
            NormMode::Row => &self.row,
            NormMode::Column => &self.column,
            NormMode::Symmetric => &self.symmetric,
        }
    }
}

fn check_cols(tape: &Tape, x: Var, expected: usize, op: &'static str) -> Result<()> {
    let cols = tape.shape(x).1;
    if cols != expected {
        return Err(Error::dim(
            op,
            format!("input has {cols} columns, layer expects {expected}"),
        ));
    }
    Ok(())
}

/// Fully connected layer `xW + b`.
#[derive(Clone, Debug)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub fan_in: usize,
    pub fan_out: usize,
}

impl Linear {
    pub fn new(store: &mut ParamStore, name: &str, fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Self {
        Self {
            weight: store.add_glorot(format!("{name}.weight"), fan_in, fan_out, rng),
            bias: store.add_zeros(format!("{name}.bias"), 1, fan_out),
            fan_in,
            fan_out,
        }
    }

    pub fn forward(&self, tape: &mut Tape, params: &BoundParams, x: Var) -> Result<Var> {
        check_cols(tape, x, self.fan_in, "linear")?;
        let xw = tape.matmul(x, params.get(self.weight))?;
        tape.add_row_vector(xw, params.get(self.bias))
    }
}

/// Graph convolution `ÂxW + b` with the self-looped symmetric adjacency.
#[derive(Clone, Debug)]
pub struct GcnLayer {
    pub weight: ParamId,
    pub bias: ParamId,
    pub fan_in: usize,
    pub fan_out: usize,
}

impl GcnLayer {
    pub fn new(store: &mut ParamStore, name: &str, fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Self {
        let lin = Linear::new(store, name, fan_in, fan_out, rng);
        Self {
            weight: lin.weight,
            bias: lin.bias,
            fan_in,
            fan_out,
        }
    }

    pub fn forward(
        &self,
        tape: &mut Tape,
        params: &BoundParams,
        adjacency: &Arc<SparseOperator>,
        x: Var,
    ) -> Result<Var> {
        check_cols(tape, x, self.fan_in, "gcn")?;
        let xw = tape.matmul(x, params.get(self.weight))?;
        let axw = tape.sparse_matmul(adjacency, xw)?;
        tape.add_row_vector(axw, params.get(self.bias))
    }
}

/// Single-head additive attention layer:
/// `α_ij = softmax_{j∈N(i)∪{i}} leaky_relu(a_srcᵀh_i + a_dstᵀh_j)`,
/// output `Σ_j α_ij h_j + b` with `h = xW`.
#[derive(Clone, Debug)]
pub struct GatLayer {
    pub weight: ParamId,
    pub att_src: ParamId,
    pub att_dst: ParamId,
    pub bias: ParamId,
    pub fan_in: usize,
    pub fan_out: usize,
    pub negative_slope: f64,
}

impl GatLayer {
    pub fn new(store: &mut ParamStore, name: &str, fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Self {
        Self {
            weight: store.add_glorot(format!("{name}.weight"), fan_in, fan_out, rng),
            att_src: store.add_glorot(format!("{name}.att_src"), fan_out, 1, rng),
            att_dst: store.add_glorot(format!("{name}.att_dst"), fan_out, 1, rng),
            bias: store.add_zeros(format!("{name}.bias"), 1, fan_out),
            fan_in,
            fan_out,
            negative_slope: 0.2,
        }
    }

    /// Row-stochastic attention matrix on the support, and `h = xW`.
    pub fn attention(
        &self,
        tape: &mut Tape,
        params: &BoundParams,
        support: &Arc<Tensor>,
        x: Var,
    ) -> Result<(Var, Var)> {
        check_cols(tape, x, self.fan_in, "gat")?;
        let n = tape.shape(x).0;
        let h = tape.matmul(x, params.get(self.weight))?;
        let s_src = tape.matmul(h, params.get(self.att_src))?;
        let s_dst = tape.matmul(h, params.get(self.att_dst))?;
        let src = tape.broadcast_cols(s_src, n)?;
        let dst_row = tape.transpose(s_dst)?;
        let dst = tape.broadcast_rows(dst_row, n)?;
        let scores = tape.add(src, dst)?;
        let scores = tape.leaky_relu(scores, self.negative_slope)?;
        let alpha = tape.masked_softmax_rows(scores, support)?;
        Ok((alpha, h))
    }

    pub fn forward(&self, tape: &mut Tape, params: &BoundParams, support: &Arc<Tensor>, x: Var) -> Result<Var> {
        let (alpha, h) = self.attention(tape, params, support, x)?;
        let out = tape.matmul(alpha, h)?;
        tape.add_row_vector(out, params.get(self.bias))
    }
}

/// Scaled dot-product attention restricted to the support:
/// `softmax_{j∈N(i)∪{i}} ((xW_q)(xW_k)ᵀ / √d)_ij`.
#[derive(Clone, Debug)]
pub struct DotAttention {
    pub query: ParamId,
    pub key: ParamId,
    pub fan_in: usize,
    pub key_dim: usize,
}

impl DotAttention {
    pub fn new(store: &mut ParamStore, name: &str, fan_in: usize, key_dim: usize, rng: &mut impl Rng) -> Self {
        Self {
            query: store.add_glorot(format!("{name}.query"), fan_in, key_dim, rng),
            key: store.add_glorot(format!("{name}.key"), fan_in, key_dim, rng),
            fan_in,
            key_dim,
        }
    }

    pub fn forward(&self, tape: &mut Tape, params: &BoundParams, support: &Arc<Tensor>, x: Var) -> Result<Var> {
        check_cols(tape, x, self.fan_in, "dot_attention")?;
        let q = tape.matmul(x, params.get(self.query))?;
        let k = tape.matmul(x, params.get(self.key))?;
        let kt = tape.transpose(k)?;
        let scores = tape.matmul(q, kt)?;
        let scores = tape.scale(scores, 1.0 / (self.key_dim as f64).sqrt())?;
        tape.masked_softmax_rows(scores, support)
    }
}
