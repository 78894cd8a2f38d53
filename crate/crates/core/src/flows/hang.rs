//! Canonical Hamiltonian flow `q' = ∂H/∂p`, `p' = −∂H/∂q`.

use std::sync::Arc;

use super::{PhaseState, VectorField};
use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::nets::{BoundParams, Hamiltonian};

#[derive(Clone, Debug)]
pub struct HamiltonianField {
    pub hamiltonian: Arc<dyn Hamiltonian>,
}

impl HamiltonianField {
    pub fn new(hamiltonian: Arc<dyn Hamiltonian>) -> Self {
        Self { hamiltonian }
    }

    /// `H`, `∂H/∂q` and `∂H/∂p` from a single backward sweep. The partials
    /// remain differentiable.
    pub fn energy_and_partials(
        &self,
        tape: &mut Tape,
        params: &BoundParams,
        q: Var,
        p: Var,
    ) -> Result<(Var, Var, Var)> {
        let name = self.hamiltonian.name();
        let tag = |e: Error| match e {
            Error::Numeric { op } => Error::Numeric {
                op: format!("{name} energy ({op})"),
            },
            other => other,
        };
        let q = tape.watch(q);
        let p = tape.watch(p);
        let h = self.hamiltonian.energy(tape, params, q, p).map_err(tag)?;
        let grads = tape.grad(h, &[q, p]).map_err(tag)?;
        Ok((h, grads[0], grads[1]))
    }
}

impl VectorField for HamiltonianField {
    fn eval(&self, tape: &mut Tape, params: &BoundParams, state: &PhaseState<Var>) -> Result<PhaseState<Var>> {
        let p = *state.momentum_or_err()?;
        let (_, dh_dq, dh_dp) = self.energy_and_partials(tape, params, state.position, p)?;
        let dp = tape.scale(dh_dq, -1.0)?;
        Ok(PhaseState::pair(dh_dp, dp))
    }

    fn name(&self) -> &str {
        self.hamiltonian.name()
    }

    fn partitioned(&self) -> bool {
        true
    }

    fn energy(&self, tape: &mut Tape, params: &BoundParams, state: &PhaseState<Var>) -> Result<Option<Var>> {
        let p = *state.momentum_or_err()?;
        self.hamiltonian.energy(tape, params, state.position, p).map(Some)
    }
}
