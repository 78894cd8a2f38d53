//! Coupled oscillators `Y' = σ(F(X)) − γX − αY`, `X' = Y`.

use std::sync::Arc;

use super::flow::{Activation, Coupling};
use super::{PhaseState, VectorField};
use crate::autodiff::{SparseOperator, Tape, Var};
use crate::error::Result;
use crate::nets::{BoundParams, ParamId};

#[derive(Clone, Debug)]
pub struct GraphCon {
    /// `F(X) = ÂXW` for a learnable `W`, or `F(X) = ÂX`.
    pub coupling: Coupling,
    pub weight: Option<ParamId>,
    pub adjacency: Arc<SparseOperator>,
    pub activation: Activation,
    pub gamma: f64,
    pub alpha: f64,
}

impl GraphCon {
    fn coupling_term(&self, tape: &mut Tape, params: &BoundParams, x: Var) -> Result<Var> {
        let xw = match (self.coupling, self.weight) {
            (Coupling::Learnable, Some(w)) => tape.matmul(x, params.get(w))?,
            _ => x,
        };
        tape.sparse_matmul(&self.adjacency, xw)
    }
}

impl VectorField for GraphCon {
    fn eval(&self, tape: &mut Tape, params: &BoundParams, state: &PhaseState<Var>) -> Result<PhaseState<Var>> {
        let x = state.position;
        let y = *state.momentum_or_err()?;
        let f = self.coupling_term(tape, params, x)?;
        let f = match self.activation {
            Activation::Identity => f,
            Activation::Relu => tape.relu(f)?,
        };
        let gx = tape.scale(x, self.gamma)?;
        let ay = tape.scale(y, self.alpha)?;
        let dy = tape.sub(f, gx)?;
        let dy = tape.sub(dy, ay)?;
        Ok(PhaseState::pair(y, dy))
    }

    fn name(&self) -> &str {
        "graphcon"
    }

    fn partitioned(&self) -> bool {
        true
    }

    /// `½‖Y‖² + ½⟨X, γX − ÂX⟩`, available for the fixed identity-activated
    /// coupling with a symmetric `Â`. Conserved when `α = 0` and
    /// non-increasing when `α > 0`.
    fn energy(&self, tape: &mut Tape, params: &BoundParams, state: &PhaseState<Var>) -> Result<Option<Var>> {
        if self.coupling != Coupling::Fixed || self.activation != Activation::Identity {
            return Ok(None);
        }
        let x = state.position;
        let y = *state.momentum_or_err()?;
        let yy = tape.hadamard(y, y)?;
        let kinetic = tape.sum(yy)?;
        let ax = self.coupling_term(tape, params, x)?;
        let gx = tape.scale(x, self.gamma)?;
        let lx = tape.sub(gx, ax)?;
        let xlx = tape.hadamard(x, lx)?;
        let potential = tape.sum(xlx)?;
        let total = tape.add(kinetic, potential)?;
        Ok(Some(tape.scale(total, 0.5)?))
    }
}
