//! Diffusion flows `dX/dt = (A − αI)X`.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use log::{debug, warn};

use super::{PhaseState, VectorField};
use crate::autodiff::{SparseOperator, Tape, Tensor, Var};
use crate::error::Result;
use crate::nets::{sinkhorn_on_tape, BoundParams, DotAttention, SinkhornStats};

/// Diffusion with a fixed stochastic adjacency `A`.
#[derive(Clone, Debug)]
pub struct GrandL {
    pub adjacency: Arc<SparseOperator>,
    pub alpha: f64,
}

impl VectorField for GrandL {
    fn eval(&self, tape: &mut Tape, _params: &BoundParams, state: &PhaseState<Var>) -> Result<PhaseState<Var>> {
        let x = state.position;
        let ax = tape.sparse_matmul(&self.adjacency, x)?;
        let damp = tape.scale(x, self.alpha)?;
        Ok(PhaseState::single(tape.sub(ax, damp)?))
    }

    fn name(&self) -> &str {
        "grand_l"
    }

    fn generator(&self, tape: &mut Tape, _params: &BoundParams, _x: Var) -> Result<Option<Var>> {
        let a = self.adjacency.matrix().to_dense();
        let n = a.rows();
        let l = a.sub(&Tensor::identity(n).scale(self.alpha))?;
        Ok(Some(tape.constant(l)))
    }
}

/// Diffusion with state-dependent attention made doubly stochastic by
/// Sinkhorn scaling.
#[derive(Clone, Debug)]
pub struct GrandNl {
    pub attention: DotAttention,
    pub support: Arc<Tensor>,
    pub alpha: f64,
    pub sinkhorn_iters: usize,
    pub sinkhorn_tol: f64,
}

impl GrandNl {
    /// The doubly stochastic attention matrix at `x`.
    pub fn attention_matrix(&self, tape: &mut Tape, params: &BoundParams, x: Var) -> Result<(Var, SinkhornStats)> {
        let a = self.attention.forward(tape, params, &self.support, x)?;
        let (a, stats) = sinkhorn_on_tape(tape, a, self.sinkhorn_iters, self.sinkhorn_tol)?;
        if !stats.converged {
            // Every field evaluation repeats this; only the first is a warning.
            static REPORTED: AtomicBool = AtomicBool::new(false);
            if REPORTED.swap(true, Ordering::Relaxed) {
                debug!(
                    "sinkhorn stopped after {} iterations with residual {:.3e}",
                    stats.iterations, stats.residual
                );
            } else {
                warn!(
                    "sinkhorn stopped after {} iterations with residual {:.3e}; further occurrences are logged at debug level",
                    stats.iterations, stats.residual
                );
            }
        }
        Ok((a, stats))
    }
}

impl VectorField for GrandNl {
    fn eval(&self, tape: &mut Tape, params: &BoundParams, state: &PhaseState<Var>) -> Result<PhaseState<Var>> {
        let x = state.position;
        let (a, _) = self.attention_matrix(tape, params, x)?;
        let ax = tape.matmul(a, x)?;
        let damp = tape.scale(x, self.alpha)?;
        Ok(PhaseState::single(tape.sub(ax, damp)?))
    }

    fn name(&self) -> &str {
        "grand_nl"
    }

    fn generator(&self, tape: &mut Tape, params: &BoundParams, x: Var) -> Result<Option<Var>> {
        let (a, _) = self.attention_matrix(tape, params, x)?;
        let n = tape.shape(a).0;
        let damp = tape.constant(Tensor::identity(n).scale(self.alpha));
        Ok(Some(tape.sub(a, damp)?))
    }
}
