use std::collections::BTreeSet;

use log::warn;
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::{cross_entropy, GcnSurrogate, NodeClassifier};
use crate::autodiff::{Tape, Tensor};
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeDataset};
use crate::nets::GraphContext;
use crate::rng;

/// Candidate flips per round that are re-scored with an exact forward pass
/// after ranking by the first-order score.
pub const EDGE_FLIP_SHORTLIST: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    PgdFeature,
    Injection,
    EdgeFlip,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttackBudget {
    pub kind: AttackKind,
    /// ∞-norm radius of the feature perturbation.
    pub epsilon: f64,
    /// Read `epsilon` as a multiple of the clean feature standard deviation.
    pub epsilon_relative: bool,
    pub steps: usize,
    /// Ascent step; defaults to `ε/10` for features and to a twentieth of
    /// each feature's clean range for injected nodes.
    pub step_size: Option<f64>,
    pub n_inject_nodes: usize,
    pub max_degree_per_injected: usize,
    pub n_flips: usize,
    pub seed: u64,
}

impl Default for AttackBudget {
    fn default() -> Self {
        Self {
            kind: AttackKind::PgdFeature,
            epsilon: 0.0,
            epsilon_relative: false,
            steps: 20,
            step_size: None,
            n_inject_nodes: 0,
            max_degree_per_injected: 0,
            n_flips: 0,
            seed: 0,
        }
    }
}

impl AttackBudget {
    pub fn pgd(epsilon: f64) -> Self {
        Self {
            epsilon,
            ..Self::default()
        }
    }

    pub fn injection(n_inject_nodes: usize, max_degree_per_injected: usize) -> Self {
        Self {
            kind: AttackKind::Injection,
            n_inject_nodes,
            max_degree_per_injected,
            ..Self::default()
        }
    }

    pub fn edge_flip(n_flips: usize) -> Self {
        Self {
            kind: AttackKind::EdgeFlip,
            n_flips,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be non-negative, got {}",
                self.epsilon
            )));
        }
        if let Some(s) = self.step_size {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "step size must be non-negative, got {s}"
                )));
            }
        }
        Ok(())
    }

    pub fn effective_epsilon(&self, data: &NodeDataset) -> f64 {
        if self.epsilon_relative {
            self.epsilon * data.feature_std()
        } else {
            self.epsilon
        }
    }

    /// Short identifier used in reports.
    pub fn label(&self) -> String {
        match self.kind {
            AttackKind::PgdFeature => {
                let unit = if self.epsilon_relative { "std" } else { "" };
                format!("pgd_feature(eps={}{unit})", self.epsilon)
            }
            AttackKind::Injection => format!(
                "injection(nodes={},degree={})",
                self.n_inject_nodes, self.max_degree_per_injected
            ),
            AttackKind::EdgeFlip => format!("edge_flip(flips={})", self.n_flips),
        }
    }
}

fn sign(g: f64) -> f64 {
    if g > 0.0 {
        1.0
    } else if g < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Gradient of the test-node cross-entropy of `model` with respect to the
/// features.
fn feature_gradient(
    model: &dyn NodeClassifier,
    ctx: &GraphContext,
    x: &Tensor,
    labels: &[usize],
    nodes: &[usize],
) -> Result<Tensor> {
    let mut tape = Tape::new();
    let params = model.params().bind(&mut tape, false);
    let xv = tape.leaf(x.clone());
    let logits = model.logits(&mut tape, &params, ctx, xv)?;
    let loss = cross_entropy(&mut tape, logits, labels, nodes)?;
    Ok(tape.backward_wrt(loss, &[xv])?.remove(0))
}

/// Evasion attack on test-node features:
/// `x ← clip_{‖x − x₀‖∞ ≤ ε}(x + step·sign(∇ₓ loss))`, where the loss is the
/// cross-entropy of `model` on the test nodes. Other rows are untouched.
pub fn pgd_feature_attack(model: &dyn NodeClassifier, data: &NodeDataset, budget: &AttackBudget) -> Result<Tensor> {
    budget.validate()?;
    let eps = budget.effective_epsilon(data);
    let x0 = &data.features;
    let test = &data.split.test;
    if eps == 0.0 || budget.steps == 0 || test.is_empty() {
        return Ok(x0.clone());
    }
    let step = budget.step_size.unwrap_or(eps / 10.0);
    let ctx = GraphContext::new(&data.graph);
    let mut x = x0.clone();
    for _ in 0..budget.steps {
        let g = feature_gradient(model, &ctx, &x, &data.labels, test)?;
        for &i in test {
            for k in 0..x.cols() {
                let base = x0.get(i, k);
                let moved = x.get(i, k) + step * sign(g.get(i, k));
                x.set(i, k, moved.clamp(base - eps, base + eps));
            }
        }
    }
    Ok(x)
}

/// Appends `n_inject_nodes` nodes, each joined to `max_degree_per_injected`
/// distinct test nodes drawn from the `attack.injection` stream. Injected
/// features start at the clean feature mean and are then optimized by
/// sign-gradient ascent on the test-node loss of `model`, staying inside the
/// per-feature range of the clean features. Injected nodes get label 0 and
/// belong to no split; original nodes, edges and features are unchanged.
pub fn injection_attack(model: &dyn NodeClassifier, data: &NodeDataset, budget: &AttackBudget) -> Result<NodeDataset> {
    budget.validate()?;
    let n_inj = budget.n_inject_nodes;
    if n_inj == 0 {
        return Ok(data.clone());
    }
    let test = &data.split.test;
    let degree = budget.max_degree_per_injected;
    if degree > test.len() {
        return Err(Error::InvalidArgument(format!(
            "each injected node needs {degree} distinct test neighbours but only {} test nodes exist",
            test.len()
        )));
    }
    let n = data.num_nodes();
    let d = data.feature_dim();
    let mut r = rng::stream(budget.seed, "attack.injection");
    let mut edges = data.graph.edges();
    for k in 0..n_inj {
        for idx in sample(&mut r, test.len(), degree) {
            edges.push((n + k, test[idx], 1.0));
        }
    }
    let graph = Graph::from_edges(n + n_inj, &edges)?;

    let x0 = &data.features;
    let lo: Vec<f64> = (0..d)
        .map(|k| (0..n).map(|i| x0.get(i, k)).fold(f64::INFINITY, f64::min))
        .collect();
    let hi: Vec<f64> = (0..d)
        .map(|k| (0..n).map(|i| x0.get(i, k)).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let mean = x0.col_sums().scale(1.0 / n as f64);
    let mut x = x0.stack_rows(&Tensor::from_fn(n_inj, d, |_, k| mean.get(0, k)))?;

    let mut labels = data.labels.clone();
    labels.extend(std::iter::repeat_n(0, n_inj));
    if !test.is_empty() {
        let ctx = GraphContext::new(&graph);
        for _ in 0..budget.steps {
            let g = feature_gradient(model, &ctx, &x, &labels, test)?;
            for i in n..n + n_inj {
                for k in 0..d {
                    let step = budget.step_size.unwrap_or((hi[k] - lo[k]) / 20.0);
                    let moved = x.get(i, k) + step * sign(g.get(i, k));
                    x.set(i, k, moved.clamp(lo[k], hi[k]));
                }
            }
        }
    }
    NodeDataset::new(graph, x, labels, data.num_classes, data.split.clone())
}

/// One applied flip of the undirected pair `(u, v)`, `u < v`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeFlip {
    pub u: usize,
    pub v: usize,
    pub added: bool,
}

fn dense_loss(surrogate: &GcnSurrogate, a: &Tensor, data: &NodeDataset) -> Result<f64> {
    let mut tape = Tape::new();
    let p = surrogate.store.bind(&mut tape, false);
    let av = tape.constant(a.clone());
    let a_hat = GcnSurrogate::normalize_dense(&mut tape, av)?;
    let x = tape.constant(data.features.clone());
    let logits = surrogate.logits_dense(&mut tape, &p, a_hat, x)?;
    let loss = cross_entropy(&mut tape, logits, &data.labels, &data.split.test)?;
    Ok(tape.value(loss).item())
}

fn flip(a: &mut Tensor, u: usize, v: usize) -> bool {
    let added = a.get(u, v) <= 0.0;
    let w = if added { 1.0 } else { 0.0 };
    a.set(u, v, w);
    a.set(v, u, w);
    added
}

/// Greedy structure attack on the surrogate's test-node loss. Each round
/// ranks every unflipped pair by the first-order change
/// `(∂L/∂A_uv + ∂L/∂A_vu)(1 − 2A_uv)` of the dense relaxation, re-scores
/// the best [`EDGE_FLIP_SHORTLIST`] exactly, and applies the flip with the
/// highest loss (ties to the lowest pair). Added edges have weight 1.
pub fn edge_flip_attack(
    surrogate: &GcnSurrogate,
    data: &NodeDataset,
    budget: &AttackBudget,
) -> Result<(NodeDataset, Vec<EdgeFlip>)> {
    budget.validate()?;
    if budget.n_flips == 0 {
        return Ok((data.clone(), Vec::new()));
    }
    if data.split.test.is_empty() {
        return Err(Error::InvalidArgument("edge-flip attack needs test nodes".into()));
    }
    let n = data.num_nodes();
    let mut a = data.graph.to_dense();
    let mut used: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut flips = Vec::with_capacity(budget.n_flips);
    let pool = n * n.saturating_sub(1) / 2;
    if budget.n_flips > pool {
        warn!(
            "{} flips requested but only {pool} pairs exist; flipping all of them",
            budget.n_flips
        );
    }

    for _ in 0..budget.n_flips.min(pool) {
        let mut tape = Tape::new();
        let p = surrogate.store.bind(&mut tape, false);
        let av = tape.leaf(a.clone());
        let a_hat = GcnSurrogate::normalize_dense(&mut tape, av)?;
        let x = tape.constant(data.features.clone());
        let logits = surrogate.logits_dense(&mut tape, &p, a_hat, x)?;
        let loss = cross_entropy(&mut tape, logits, &data.labels, &data.split.test)?;
        let g = tape.backward_wrt(loss, &[av])?.remove(0);

        let mut ranked: Vec<(f64, usize, usize)> = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if used.contains(&(u, v)) {
                    continue;
                }
                let direction = if a.get(u, v) > 0.0 { -1.0 } else { 1.0 };
                ranked.push(((g.get(u, v) + g.get(v, u)) * direction, u, v));
            }
        }
        ranked.sort_by(|x, y| y.0.total_cmp(&x.0).then((x.1, x.2).cmp(&(y.1, y.2))));
        ranked.truncate(EDGE_FLIP_SHORTLIST);
        ranked.sort_by_key(|&(_, u, v)| (u, v));

        let mut best: Option<(f64, usize, usize)> = None;
        for &(_, u, v) in &ranked {
            let mut trial = a.clone();
            flip(&mut trial, u, v);
            let l = dense_loss(surrogate, &trial, data)?;
            if best.is_none_or(|(bl, _, _)| l > bl) {
                best = Some((l, u, v));
            }
        }
        let Some((_, u, v)) = best else { break };
        let added = flip(&mut a, u, v);
        used.insert((u, v));
        flips.push(EdgeFlip { u, v, added });
    }
    let modified = data.with_graph(Graph::from_dense(&a)?)?;
    Ok((modified, flips))
}
