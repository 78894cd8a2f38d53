//! `dX/dt = (A_S ⊙ B_S − Ψ)X` with `Ψ = diag(row sums of A_S ⊙ B_S)`.

use std::sync::Arc;

use super::flow::Similarity;
use super::{PhaseState, VectorField};
use crate::autodiff::{Tape, Tensor, Var};
use crate::error::Result;
use crate::nets::{BoundParams, DotAttention};

/// Stabilizer inside square roots of squared norms.
const NORM_EPS: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct GraphBel {
    pub attention: DotAttention,
    pub support: Arc<Tensor>,
    pub similarity: Similarity,
}

impl GraphBel {
    fn inv_row_norms(tape: &mut Tape, x: Var) -> Result<Var> {
        let xx = tape.hadamard(x, x)?;
        let s = tape.row_sums(xx)?;
        let s = tape.add_scalar(s, NORM_EPS)?;
        let norms = tape.powf(s, 0.5)?;
        tape.safe_recip(norms)
    }

    /// `B_S`: cosine similarity on the support, each row then scaled to unit
    /// ℓ₂ norm. For [`Similarity::Ones`] it is 1 everywhere.
    pub fn similarity_matrix(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let n = tape.shape(x).0;
        match self.similarity {
            Similarity::Ones => Ok(tape.constant(Tensor::ones(n, n))),
            Similarity::Cosine => {
                let inv = Self::inv_row_norms(tape, x)?;
                let xn = tape.scale_rows(x, inv)?;
                let xnt = tape.transpose(xn)?;
                let cos = tape.matmul(xn, xnt)?;
                let mask = tape.constant((*self.support).clone());
                let cos = tape.hadamard(cos, mask)?;
                let inv = Self::inv_row_norms(tape, cos)?;
                tape.scale_rows(cos, inv)
            }
        }
    }

    /// `A_S ⊙ B_S − Ψ`.
    pub fn operator(&self, tape: &mut Tape, params: &BoundParams, x: Var) -> Result<Var> {
        let a = self.attention.forward(tape, params, &self.support, x)?;
        let b = self.similarity_matrix(tape, x)?;
        let ab = tape.hadamard(a, b)?;
        let psi = tape.row_sums(ab)?;
        let n = tape.shape(x).0;
        let eye = tape.constant(Tensor::identity(n));
        let psi = tape.scale_rows(eye, psi)?;
        tape.sub(ab, psi)
    }
}

impl VectorField for GraphBel {
    fn eval(&self, tape: &mut Tape, params: &BoundParams, state: &PhaseState<Var>) -> Result<PhaseState<Var>> {
        let x = state.position;
        let l = self.operator(tape, params, x)?;
        Ok(PhaseState::single(tape.matmul(l, x)?))
    }

    fn name(&self) -> &str {
        "graphbel"
    }

    fn generator(&self, tape: &mut Tape, params: &BoundParams, x: Var) -> Result<Option<Var>> {
        self.operator(tape, params, x).map(Some)
    }
}
