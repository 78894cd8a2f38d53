//! Learnable energy functions `H(q, p)` over a graph's phase space.

use std::fmt::Debug;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layers::{GatLayer, GcnLayer, GraphContext};
use super::params::{BoundParams, ParamId, ParamStore};
use crate::autodiff::{SparseOperator, Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Scalar energy of a phase-space state `(q, p)`, both `|V|×r`.
pub trait Hamiltonian: Debug + Send + Sync {
    fn energy(&self, tape: &mut Tape, params: &BoundParams, q: Var, p: Var) -> Result<Var>;

    fn name(&self) -> &'static str;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyKind {
    Vanilla,
    Quadratic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergyConfig {
    pub kind: EnergyKind,
    /// Hidden width of the inner layer.
    pub hidden: usize,
    /// Kinetic regularizer of the quadratic energy.
    pub sigma: f64,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        Self {
            kind: EnergyKind::Vanilla,
            hidden: 16,
            sigma: 0.1,
        }
    }
}

pub fn build_energy(
    cfg: &EnergyConfig,
    store: &mut ParamStore,
    ctx: &GraphContext,
    r: usize,
    rng: &mut impl Rng,
) -> Result<Arc<dyn Hamiltonian>> {
    if cfg.hidden == 0 {
        return Err(Error::InvalidArgument("energy hidden width must be at least 1".into()));
    }
    Ok(match cfg.kind {
        EnergyKind::Vanilla => Arc::new(VanillaEnergy::new(store, ctx, r, cfg.hidden, rng)),
        EnergyKind::Quadratic => Arc::new(QuadEnergy::new(store, ctx, r, cfg.hidden, cfg.sigma, rng)?),
    })
}

/// `H = ‖gcn₂(tanh(gcn₁([q, p])))‖₂`.
#[derive(Clone, Debug)]
pub struct VanillaEnergy {
    pub gcn1: GcnLayer,
    pub gcn2: GcnLayer,
    adjacency: Arc<SparseOperator>,
}

impl VanillaEnergy {
    pub fn new(store: &mut ParamStore, ctx: &GraphContext, r: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        Self {
            gcn1: GcnLayer::new(store, "energy.gcn1", 2 * r, hidden, rng),
            gcn2: GcnLayer::new(store, "energy.gcn2", hidden, 1, rng),
            adjacency: Arc::clone(&ctx.gcn),
        }
    }
}

impl Hamiltonian for VanillaEnergy {
    fn energy(&self, tape: &mut Tape, params: &BoundParams, q: Var, p: Var) -> Result<Var> {
        if tape.shape(q) != tape.shape(p) {
            return Err(Error::dim(
                "vanilla_energy",
                format!("q {:?} vs p {:?}", tape.shape(q), tape.shape(p)),
            ));
        }
        let qp = tape.concat_cols(q, p)?;
        let h1 = self.gcn1.forward(tape, params, &self.adjacency, qp)?;
        let h1 = tape.tanh(h1)?;
        let h2 = self.gcn2.forward(tape, params, &self.adjacency, h1)?;
        tape.l2_norm(h2)
    }

    fn name(&self) -> &'static str {
        "vanilla"
    }
}

/// `H = T(q,p) + U(q)` with
/// `T = Σ_k ‖A(q_k)ᵀp_k‖² + σ‖p‖²`, `A(q_k) = reshape_{r×r}(q_k W_T)`, and
/// `U = ‖sin(gat(q))‖₂`.
#[derive(Clone, Debug)]
pub struct QuadEnergy {
    pub w_t: ParamId,
    pub gat: GatLayer,
    pub sigma: f64,
    r: usize,
    support: Arc<Tensor>,
    /// `r × r²`, copies `p[k,a]` to column `a·r + b` for every `b`.
    expand: Tensor,
    /// `r² × r`, sums column `a·r + b` into column `b`.
    group: Tensor,
}

impl QuadEnergy {
    pub fn new(
        store: &mut ParamStore,
        ctx: &GraphContext,
        r: usize,
        hidden: usize,
        sigma: f64,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
        }
        let r2 = r * r;
        Ok(Self {
            w_t: store.add_glorot("energy.kinetic", r, r2, rng),
            gat: GatLayer::new(store, "energy.gat", r, hidden, rng),
            sigma,
            r,
            support: Arc::clone(&ctx.support),
            expand: Tensor::from_fn(r, r2, |a, c| if c / r == a { 1.0 } else { 0.0 }),
            group: Tensor::from_fn(r2, r, |c, b| if c % r == b { 1.0 } else { 0.0 }),
        })
    }

    pub fn kinetic(&self, tape: &mut Tape, params: &BoundParams, q: Var, p: Var) -> Result<Var> {
        if tape.shape(q) != tape.shape(p) || tape.shape(q).1 != self.r {
            return Err(Error::dim(
                "quad_energy",
                format!("q {:?}, p {:?}, width {}", tape.shape(q), tape.shape(p), self.r),
            ));
        }
        let m = tape.matmul(q, params.get(self.w_t))?;
        let e = tape.constant(self.expand.clone());
        let pe = tape.matmul(p, e)?;
        let prod = tape.hadamard(m, pe)?;
        let g = tape.constant(self.group.clone());
        let u = tape.matmul(prod, g)?;
        let uu = tape.hadamard(u, u)?;
        let t_att = tape.sum(uu)?;
        let pp = tape.hadamard(p, p)?;
        let t_reg = tape.sum(pp)?;
        let t_reg = tape.scale(t_reg, self.sigma)?;
        tape.add(t_att, t_reg)
    }

    pub fn potential(&self, tape: &mut Tape, params: &BoundParams, q: Var) -> Result<Var> {
        let h = self.gat.forward(tape, params, &self.support, q)?;
        let s = tape.sin(h)?;
        tape.l2_norm(s)
    }
}

impl Hamiltonian for QuadEnergy {
    fn energy(&self, tape: &mut Tape, params: &BoundParams, q: Var, p: Var) -> Result<Var> {
        let t = self.kinetic(tape, params, q, p)?;
        let u = self.potential(tape, params, q)?;
        tape.add(t, u)
    }

    fn name(&self) -> &'static str {
        "quadratic"
    }
}

/// `H = (‖p‖² + ‖q‖²)/2`, whose flow rotates each `(q_i, p_i)` pair.
#[derive(Clone, Copy, Debug, Default)]
pub struct OscillatorEnergy;

impl Hamiltonian for OscillatorEnergy {
    fn energy(&self, tape: &mut Tape, _params: &BoundParams, q: Var, p: Var) -> Result<Var> {
        let qq = tape.hadamard(q, q)?;
        let pp = tape.hadamard(p, p)?;
        let a = tape.sum(qq)?;
        let b = tape.sum(pp)?;
        let s = tape.add(a, b)?;
        tape.scale(s, 0.5)
    }

    fn name(&self) -> &'static str {
        "oscillator"
    }
}
