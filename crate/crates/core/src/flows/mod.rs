//! Right-hand sides of the graph flows, evaluated on a [`Tape`].
//!
//! A field maps a [`PhaseState`] of tape handles to its time derivative.
//! Partitioned fields carry a momentum block (HANG's `p`, GraphCON's `Y`).

mod flow;
mod grand;
mod graphbel;
mod graphcon;
mod hang;

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::nets::BoundParams;

pub use flow::{Activation, Coupling, Flow, FlowKind, FlowSpec, Similarity};
pub use grand::{GrandL, GrandNl};
pub use graphbel::GraphBel;
pub use graphcon::GraphCon;
pub use hang::HamiltonianField;

/// Position block and optional momentum block of a flow state.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseState<T> {
    pub position: T,
    pub momentum: Option<T>,
}

impl<T> PhaseState<T> {
    pub fn single(position: T) -> Self {
        Self {
            position,
            momentum: None,
        }
    }

    pub fn pair(position: T, momentum: T) -> Self {
        Self {
            position,
            momentum: Some(momentum),
        }
    }

    pub fn is_partitioned(&self) -> bool {
        self.momentum.is_some()
    }

    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> PhaseState<U> {
        PhaseState {
            position: f(&self.position),
            momentum: self.momentum.as_ref().map(f),
        }
    }

    pub fn try_map<U>(&self, mut f: impl FnMut(&T) -> Result<U>) -> Result<PhaseState<U>> {
        Ok(PhaseState {
            position: f(&self.position)?,
            momentum: self.momentum.as_ref().map(f).transpose()?,
        })
    }

    /// The momentum block, or a contract error for unpartitioned states.
    pub fn momentum_or_err(&self) -> Result<&T> {
        self.momentum
            .as_ref()
            .ok_or_else(|| Error::Contract("state has no momentum block".into()))
    }
}

impl PhaseState<Tensor> {
    pub fn is_finite(&self) -> bool {
        self.position.is_finite() && self.momentum.as_ref().is_none_or(Tensor::is_finite)
    }

    /// Squared norm over both blocks.
    pub fn norm_sq(&self) -> f64 {
        let sq = |t: &Tensor| t.data().iter().map(|v| v * v).sum::<f64>();
        sq(&self.position) + self.momentum.as_ref().map_or(0.0, sq)
    }

    /// Entries of both blocks, position first.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = self.position.data().to_vec();
        if let Some(m) = &self.momentum {
            out.extend_from_slice(m.data());
        }
        out
    }

    /// Puts both blocks on `tape` as leaves.
    pub fn to_leaves(&self, tape: &mut Tape) -> PhaseState<Var> {
        self.map(|t| tape.leaf(t.clone()))
    }
}

impl PhaseState<Var> {
    pub fn values(&self, tape: &Tape) -> PhaseState<Tensor> {
        self.map(|v| tape.value(*v).clone())
    }
}

/// Time-invariant vector field over phase states.
pub trait VectorField: Send + Sync {
    fn eval(&self, tape: &mut Tape, params: &BoundParams, state: &PhaseState<Var>) -> Result<PhaseState<Var>>;

    fn name(&self) -> &str;

    /// Whether states carry a momentum block.
    fn partitioned(&self) -> bool {
        false
    }

    /// A quantity conserved by the continuous-time flow, if one is known.
    fn energy(&self, _tape: &mut Tape, _params: &BoundParams, _state: &PhaseState<Var>) -> Result<Option<Var>> {
        Ok(None)
    }

    /// The matrix `L(X)` with `dX/dt = L(X)·X`, for flows of that form.
    fn generator(&self, _tape: &mut Tape, _params: &BoundParams, _x: Var) -> Result<Option<Var>> {
        Ok(None)
    }
}

/// `dX/dt = M·X` for a constant square `M`.
#[derive(Clone, Debug)]
pub struct LinearField {
    pub matrix: Tensor,
}

impl VectorField for LinearField {
    fn eval(&self, tape: &mut Tape, _params: &BoundParams, state: &PhaseState<Var>) -> Result<PhaseState<Var>> {
        let m = tape.constant(self.matrix.clone());
        Ok(PhaseState::single(tape.matmul(m, state.position)?))
    }

    fn name(&self) -> &str {
        "linear"
    }

    fn generator(&self, tape: &mut Tape, _params: &BoundParams, _x: Var) -> Result<Option<Var>> {
        Ok(Some(tape.constant(self.matrix.clone())))
    }
}

/// The field that is identically zero, partitioned or not.
#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroField {
    pub partitioned: bool,
}

impl VectorField for ZeroField {
    fn eval(&self, tape: &mut Tape, _params: &BoundParams, state: &PhaseState<Var>) -> Result<PhaseState<Var>> {
        Ok(state.map(|v| {
            let (r, c) = tape.shape(*v);
            tape.constant(Tensor::zeros(r, c))
        }))
    }

    fn name(&self) -> &str {
        "zero"
    }

    fn partitioned(&self) -> bool {
        self.partitioned
    }
}

/// Evaluates `field` at a plain state with parameters held constant.
pub fn eval_field(
    field: &dyn VectorField,
    params: &crate::nets::ParamStore,
    state: &PhaseState<Tensor>,
) -> Result<PhaseState<Tensor>> {
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape, false);
    let s = state.to_leaves(&mut tape);
    let d = field.eval(&mut tape, &bound, &s)?;
    Ok(d.values(&tape))
}
