use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{GrandL, GrandNl, GraphBel, GraphCon, HamiltonianField, PhaseState, VectorField};
use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::graph::NormMode;
use crate::nets::{build_energy, BoundParams, DotAttention, EnergyConfig, EnergyKind, GraphContext, ParamStore};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowKind {
    GrandL,
    GrandNl,
    #[serde(rename = "graphcon")]
    GraphCon,
    #[serde(rename = "graphbel")]
    GraphBel,
    Hang,
    HangQuad,
}

impl FlowKind {
    pub const ALL: [FlowKind; 6] = [
        FlowKind::GrandL,
        FlowKind::GrandNl,
        FlowKind::GraphCon,
        FlowKind::GraphBel,
        FlowKind::Hang,
        FlowKind::HangQuad,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FlowKind::GrandL => "grand_l",
            FlowKind::GrandNl => "grand_nl",
            FlowKind::GraphCon => "graphcon",
            FlowKind::GraphBel => "graphbel",
            FlowKind::Hang => "hang",
            FlowKind::HangQuad => "hang_quad",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }

    pub fn is_hamiltonian(self) -> bool {
        matches!(self, FlowKind::Hang | FlowKind::HangQuad)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    /// `ÂXW` with learnable `W` and the self-looped GCN adjacency.
    Learnable,
    /// `ÂX` with the symmetric-normalized adjacency.
    Fixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Similarity {
    Cosine,
    Ones,
}

/// Everything needed to build one flow.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowSpec {
    pub kind: FlowKind,
    /// Damping in the diffusion flows and GraphCON.
    pub alpha: f64,
    /// GraphCON restoring coefficient.
    pub gamma: f64,
    /// Normalization of the fixed adjacency of `grand_l`.
    pub adjacency: NormMode,
    /// GraphCON activation.
    pub activation: Activation,
    /// GraphCON coupling.
    pub coupling: Coupling,
    /// GraphBel similarity map.
    pub similarity: Similarity,
    /// Key width of dot-product attention; the state width when absent.
    pub attention_dim: Option<usize>,
    pub sinkhorn_iters: usize,
    pub sinkhorn_tol: f64,
    /// Hidden width of the HANG energy networks.
    pub energy_hidden: usize,
    /// Kinetic regularizer of `hang_quad`.
    pub sigma: f64,
}

impl Default for FlowSpec {
    fn default() -> Self {
        Self {
            kind: FlowKind::Hang,
            alpha: 1.0,
            gamma: 1.0,
            adjacency: NormMode::Row,
            activation: Activation::Relu,
            coupling: Coupling::Learnable,
            similarity: Similarity::Cosine,
            attention_dim: None,
            sinkhorn_iters: 30,
            sinkhorn_tol: 1e-8,
            energy_hidden: 16,
            sigma: 0.1,
        }
    }
}

impl FlowSpec {
    pub fn new(kind: FlowKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "alpha must be finite and >= 0, got {}",
                self.alpha
            )));
        }
        if !self.gamma.is_finite() {
            return Err(Error::InvalidArgument("gamma must be finite".into()));
        }
        if self.attention_dim == Some(0) || self.energy_hidden == 0 {
            return Err(Error::InvalidArgument(
                "attention_dim and energy_hidden must be positive".into(),
            ));
        }
        if !(self.sinkhorn_tol >= 0.0) {
            return Err(Error::InvalidArgument("sinkhorn_tol must be non-negative".into()));
        }
        Ok(())
    }
}

/// A built flow: its spec and the field, with parameters registered in a
/// [`ParamStore`].
#[derive(Clone)]
pub struct Flow {
    pub spec: FlowSpec,
    field: Arc<dyn VectorField>,
}

impl std::fmt::Debug for Flow {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Flow").field("spec", &self.spec).finish_non_exhaustive()
    }
}

impl Flow {
    /// Builds the flow for states of width `r` on `ctx`, registering any
    /// parameters in `store`.
    pub fn build(
        spec: &FlowSpec,
        store: &mut ParamStore,
        ctx: &GraphContext,
        r: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        spec.validate()?;
        let key_dim = spec.attention_dim.unwrap_or(r);
        let field: Arc<dyn VectorField> = match spec.kind {
            FlowKind::GrandL => Arc::new(GrandL {
                adjacency: Arc::clone(ctx.normalized(spec.adjacency)),
                alpha: spec.alpha,
            }),
            FlowKind::GrandNl => Arc::new(GrandNl {
                attention: DotAttention::new(store, "flow.attention", r, key_dim, rng),
                support: Arc::clone(&ctx.support),
                alpha: spec.alpha,
                sinkhorn_iters: spec.sinkhorn_iters,
                sinkhorn_tol: spec.sinkhorn_tol,
            }),
            FlowKind::GraphCon => {
                let (weight, adjacency) = match spec.coupling {
                    Coupling::Learnable => (Some(store.add_glorot("flow.coupling", r, r, rng)), Arc::clone(&ctx.gcn)),
                    Coupling::Fixed => (None, Arc::clone(&ctx.symmetric)),
                };
                Arc::new(GraphCon {
                    coupling: spec.coupling,
                    weight,
                    adjacency,
                    activation: spec.activation,
                    gamma: spec.gamma,
                    alpha: spec.alpha,
                })
            }
            FlowKind::GraphBel => Arc::new(GraphBel {
                attention: DotAttention::new(store, "flow.attention", r, key_dim, rng),
                support: Arc::clone(&ctx.support),
                similarity: spec.similarity,
            }),
            FlowKind::Hang | FlowKind::HangQuad => {
                let cfg = EnergyConfig {
                    kind: if spec.kind == FlowKind::Hang {
                        EnergyKind::Vanilla
                    } else {
                        EnergyKind::Quadratic
                    },
                    hidden: spec.energy_hidden,
                    sigma: spec.sigma,
                };
                Arc::new(HamiltonianField::new(build_energy(&cfg, store, ctx, r, rng)?))
            }
        };
        Ok(Self {
            spec: spec.clone(),
            field,
        })
    }

    /// Wraps an arbitrary field, e.g. a test Hamiltonian.
    pub fn from_field(spec: FlowSpec, field: Arc<dyn VectorField>) -> Self {
        Self { spec, field }
    }

    pub fn field(&self) -> &dyn VectorField {
        self.field.as_ref()
    }

    /// Initial state from encoded features `x0`; partitioned flows start
    /// with momentum equal to position.
    pub fn initial_state(&self, tape: &mut Tape, x0: Var) -> Result<PhaseState<Var>> {
        Ok(if self.field.partitioned() {
            let m = tape.identity(x0)?;
            PhaseState::pair(x0, m)
        } else {
            PhaseState::single(x0)
        })
    }
}

impl VectorField for Flow {
    fn eval(&self, tape: &mut Tape, params: &BoundParams, state: &PhaseState<Var>) -> Result<PhaseState<Var>> {
        self.field.eval(tape, params, state)
    }

    fn name(&self) -> &str {
        self.spec.kind.as_str()
    }

    fn partitioned(&self) -> bool {
        self.field.partitioned()
    }

    fn energy(&self, tape: &mut Tape, params: &BoundParams, state: &PhaseState<Var>) -> Result<Option<Var>> {
        self.field.energy(tape, params, state)
    }

    fn generator(&self, tape: &mut Tape, params: &BoundParams, x: Var) -> Result<Option<Var>> {
        self.field.generator(tape, params, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tensor;
    use crate::flows::{eval_field, LinearField};
    use crate::graph::Graph;
    use crate::nets::OscillatorEnergy;
    use crate::rng;
    use rand_distr::{Distribution, StandardNormal};

    fn randn(rows: usize, cols: usize, seed: u64) -> Tensor {
        let mut r = rng::stream(seed, "test");
        Tensor::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut r))
    }

    fn graph6() -> Graph {
        Graph::from_edges(
            6,
            &[
                (0, 1, 1.0),
                (1, 2, 1.0),
                (2, 3, 1.0),
                (3, 0, 1.0),
                (3, 4, 2.0),
                (4, 5, 1.0),
                (1, 4, 0.5),
            ],
        )
        .unwrap()
    }

    fn build(spec: &FlowSpec, g: &Graph, r: usize) -> (Flow, ParamStore) {
        let ctx = GraphContext::new(g);
        let mut store = ParamStore::new();
        let flow = Flow::build(spec, &mut store, &ctx, r, &mut rng::stream(3, "init")).unwrap();
        (flow, store)
    }

    #[test]
    fn identity_adjacency_with_unit_alpha_is_stationary() {
        let (flow, store) = build(&FlowSpec::new(FlowKind::GrandL), &Graph::empty(3), 2);
        let d = eval_field(&flow, &store, &PhaseState::single(randn(3, 2, 1))).unwrap();
        assert_eq!(d.position.max_abs(), 0.0);
    }

    #[test]
    fn swap_matrix_example() {
        let g = Graph::from_edges(2, &[(0, 1, 1.0)]).unwrap();
        let (flow, store) = build(&FlowSpec::new(FlowKind::GrandL), &g, 1);
        let x = Tensor::new(2, 1, vec![1.0, -1.0]).unwrap();
        let d = eval_field(&flow, &store, &PhaseState::single(x)).unwrap();
        assert_eq!(d.position.data(), &[-2.0, 2.0]);
    }

    #[test]
    fn column_mode_conserves_column_sums() {
        let spec = FlowSpec {
            adjacency: NormMode::Column,
            ..FlowSpec::new(FlowKind::GrandL)
        };
        let (flow, store) = build(&spec, &graph6(), 3);
        for seed in 0..5 {
            let d = eval_field(&flow, &store, &PhaseState::single(randn(6, 3, seed))).unwrap();
            for s in d.position.col_sums().data() {
                assert!(s.abs() < 1e-14, "{s}");
            }
        }
    }

    #[test]
    fn doubly_stochastic_diffusion_decreases_norm() {
        let (flow, store) = build(&FlowSpec::new(FlowKind::GrandNl), &graph6(), 3);
        for seed in 0..5 {
            let x = randn(6, 3, seed);
            let d = eval_field(&flow, &store, &PhaseState::single(x.clone())).unwrap();
            assert!(2.0 * x.dot(&d.position).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn graphcon_at_rest_and_as_oscillator() {
        let spec = FlowSpec {
            activation: Activation::Identity,
            ..FlowSpec::new(FlowKind::GraphCon)
        };
        let (flow, store) = build(&spec, &graph6(), 2);
        let zero = PhaseState::pair(Tensor::zeros(6, 2), Tensor::zeros(6, 2));
        let d = eval_field(&flow, &store, &zero).unwrap();
        assert_eq!(d.norm_sq(), 0.0);

        // Zero coupling, γ=1, α=0: X'' = −X.
        let spec = FlowSpec { alpha: 0.0, ..spec };
        let (flow, mut store) = build(&spec, &graph6(), 2);
        let id = store.find("flow.coupling").unwrap();
        *store.get_mut(id) = Tensor::zeros(2, 2);
        let (x, y) = (randn(6, 2, 1), randn(6, 2, 2));
        let d = eval_field(&flow, &store, &PhaseState::pair(x.clone(), y.clone())).unwrap();
        assert_eq!(d.position, y);
        assert_eq!(d.momentum.unwrap(), x.scale(-1.0));
    }

    #[test]
    fn graphbel_rows_of_operator_sum_to_zero() {
        let (flow, store) = build(&FlowSpec::new(FlowKind::GraphBel), &graph6(), 3);
        let mut tape = Tape::new();
        let p = store.bind(&mut tape, false);
        let x = tape.constant(randn(6, 3, 4));
        let l = flow.generator(&mut tape, &p, x).unwrap().unwrap();
        for s in tape.value(l).row_sums().data() {
            assert!(s.abs() < 1e-14);
        }
    }

    #[test]
    fn graphbel_with_unit_similarity_is_unit_damped_diffusion() {
        let g = graph6();
        let spec = FlowSpec {
            similarity: Similarity::Ones,
            ..FlowSpec::new(FlowKind::GraphBel)
        };
        let (flow, store) = build(&spec, &g, 3);
        let x = randn(6, 3, 5);
        let d = eval_field(&flow, &store, &PhaseState::single(x.clone())).unwrap();

        // The same attention used as A_G in (A_G − I)X.
        let ctx = GraphContext::new(&g);
        let mut tape = Tape::new();
        let p = store.bind(&mut tape, false);
        let xv = tape.constant(x.clone());
        let att = DotAttention::new(
            &mut ParamStore::new(),
            "flow.attention",
            3,
            3,
            &mut rng::stream(3, "init"),
        );
        let a = att.forward(&mut tape, &p, &ctx.support, xv).unwrap();
        let expected = tape.value(a).matmul(&x).unwrap().sub(&x).unwrap();
        for (u, v) in d.position.data().iter().zip(expected.data()) {
            assert!((u - v).abs() < 1e-14);
        }
    }

    #[test]
    fn graphbel_isolated_node_is_stationary() {
        let (flow, store) = build(&FlowSpec::new(FlowKind::GraphBel), &Graph::empty(1), 2);
        let d = eval_field(&flow, &store, &PhaseState::single(randn(1, 2, 1))).unwrap();
        assert!(d.position.max_abs() < 1e-15);
    }

    #[test]
    fn oscillator_hamiltonian_rotates() {
        let flow = Flow::from_field(
            FlowSpec::new(FlowKind::Hang),
            Arc::new(HamiltonianField::new(Arc::new(OscillatorEnergy))),
        );
        let (q, p) = (randn(4, 2, 1), randn(4, 2, 2));
        let d = eval_field(&flow, &ParamStore::new(), &PhaseState::pair(q.clone(), p.clone())).unwrap();
        assert_eq!(d.position, p);
        assert_eq!(d.momentum.unwrap(), q.scale(-1.0));
    }

    #[test]
    fn zero_energy_weights_give_zero_field() {
        let (flow, mut store) = build(&FlowSpec::new(FlowKind::Hang), &graph6(), 2);
        for v in store.values_mut() {
            *v = Tensor::zeros(v.rows(), v.cols());
        }
        let d = eval_field(&flow, &store, &PhaseState::pair(randn(6, 2, 1), randn(6, 2, 2))).unwrap();
        assert_eq!(d.norm_sq(), 0.0);
    }

    #[test]
    fn hamiltonian_field_is_orthogonal_to_gradient() {
        for kind in [FlowKind::Hang, FlowKind::HangQuad] {
            let (flow, store) = build(&FlowSpec::new(kind), &graph6(), 3);
            for seed in 0..10 {
                let mut tape = Tape::new();
                let params = store.bind(&mut tape, false);
                let q = tape.leaf(randn(6, 3, seed));
                let p = tape.leaf(randn(6, 3, seed + 100));
                let state = PhaseState::pair(q, p);
                let d = flow.eval(&mut tape, &params, &state).unwrap().values(&tape);
                let h = flow.energy(&mut tape, &params, &state).unwrap().unwrap();
                let g = tape.backward_wrt(h, &[q, p]).unwrap();
                let dot = g[0].dot(&d.position).unwrap() + g[1].dot(d.momentum.as_ref().unwrap()).unwrap();
                assert!(dot.abs() <= 1e-10, "{kind:?}: {dot}");
            }
        }
    }

    #[test]
    fn unpartitioned_state_is_rejected_by_partitioned_fields() {
        let (flow, store) = build(&FlowSpec::new(FlowKind::Hang), &graph6(), 2);
        let err = eval_field(&flow, &store, &PhaseState::single(randn(6, 2, 1))).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn negative_alpha_is_rejected() {
        let spec = FlowSpec {
            alpha: -0.5,
            ..FlowSpec::new(FlowKind::GrandL)
        };
        let ctx = GraphContext::new(&graph6());
        assert!(Flow::build(&spec, &mut ParamStore::new(), &ctx, 2, &mut rng::stream(0, "init")).is_err());
    }

    #[test]
    fn flow_kind_names_round_trip() {
        for k in FlowKind::ALL {
            assert_eq!(FlowKind::parse(k.as_str()), Some(k));
            let json = serde_json::to_string(&k).unwrap();
            assert_eq!(json, format!("\"{}\"", k.as_str()));
        }
        let lf = LinearField {
            matrix: Tensor::identity(2),
        };
        assert_eq!(lf.name(), "linear");
    }
}
