//! Alternating row/column scaling towards a doubly stochastic matrix.
//!
//! Entries are floored by adding [`FLOOR`] first. Each sweep divides every
//! row by its sum, then every column by its sum; iteration stops once the
//! largest deviation of a row or column sum from 1 is below `tol`.

use serde::Serialize;

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};

pub const FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SinkhornStats {
    pub iterations: usize,
    /// `max(|row sum − 1|, |column sum − 1|)` of the returned matrix.
    pub residual: f64,
    pub converged: bool,
}

fn residual(m: &Tensor) -> f64 {
    let r = m.row_sums().data().iter().fold(0.0f64, |a, s| a.max((s - 1.0).abs()));
    let c = m.col_sums().data().iter().fold(0.0f64, |a, s| a.max((s - 1.0).abs()));
    r.max(c)
}

fn check_input(m: &Tensor) -> Result<()> {
    if m.rows() != m.cols() {
        return Err(Error::dim("sinkhorn", format!("{:?} is not square", m.shape())));
    }
    if m.data().iter().any(|&v| v + FLOOR <= 0.0) {
        return Err(Error::InvalidArgument(
            "sinkhorn input has non-positive entries after flooring".into(),
        ));
    }
    Ok(())
}

pub fn sinkhorn_normalize(m: &Tensor, max_iters: usize, tol: f64) -> Result<(Tensor, SinkhornStats)> {
    check_input(m)?;
    let n = m.rows();
    let mut a = m.map(|v| v + FLOOR);
    let mut res = residual(&a);
    let mut iterations = 0;
    while res >= tol && iterations < max_iters {
        for i in 0..n {
            let s: f64 = a.row(i).iter().sum();
            a.row_mut(i).iter_mut().for_each(|v| *v /= s);
        }
        let cols = a.col_sums();
        for i in 0..n {
            for (v, c) in a.row_mut(i).iter_mut().zip(cols.data()) {
                *v /= c;
            }
        }
        iterations += 1;
        res = residual(&a);
    }
    Ok((
        a,
        SinkhornStats {
            iterations,
            residual: res,
            converged: res < tol,
        },
    ))
}

/// The same iteration recorded on `tape`, so gradients flow through it.
/// The iteration count is decided from the values.
pub fn sinkhorn_on_tape(tape: &mut Tape, m: Var, max_iters: usize, tol: f64) -> Result<(Var, SinkhornStats)> {
    check_input(tape.value(m))?;
    let n = tape.shape(m).0;
    let mut a = tape.add_scalar(m, FLOOR)?;
    let mut res = residual(tape.value(a));
    let mut iterations = 0;
    while res >= tol && iterations < max_iters {
        let r = tape.row_sums(a)?;
        let r_inv = tape.safe_recip(r)?;
        a = tape.scale_rows(a, r_inv)?;
        let c = tape.col_sums(a)?;
        let c_inv = tape.safe_recip(c)?;
        let c_inv = tape.broadcast_rows(c_inv, n)?;
        a = tape.hadamard(a, c_inv)?;
        iterations += 1;
        res = residual(tape.value(a));
    }
    Ok((
        a,
        SinkhornStats {
            iterations,
            residual: res,
            converged: res < tol,
        },
    ))
}
