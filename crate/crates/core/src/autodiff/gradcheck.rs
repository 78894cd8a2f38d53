use serde::Serialize;

use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Outcome of comparing reverse-mode gradients with central differences.
#[derive(Clone, Debug, Serialize)]
pub struct GradCheckReport {
    /// Worst relative error over all components.
    pub max_rel_error: f64,
    /// Worst relative error over components not flagged as non-smooth.
    pub max_rel_error_smooth: f64,
    /// Flat index of the component attaining `max_rel_error`.
    pub worst_index: usize,
    /// Components whose one-sided differences disagree, i.e. `f` has a kink
    /// within `h` of `x` there.
    pub non_smooth: Vec<usize>,
    pub components: usize,
}

/// Relative error with denominator `max(|a|, |b|, 1e-8)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

fn eval(f: &impl Fn(&mut Tape, Var) -> Result<Var>, x: &Tensor) -> Result<f64> {
    let mut tape = Tape::new();
    let xv = tape.leaf(x.clone());
    let out = f(&mut tape, xv)?;
    Ok(tape.value(out).item())
}

/// Checks the gradient of the scalar function `f` at `x` componentwise
/// against central differences with step `h`.
pub fn grad_check(f: impl Fn(&mut Tape, Var) -> Result<Var>, x: &Tensor, h: f64) -> Result<GradCheckReport> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("step h must be positive, got {h}")));
    }
    let mut tape = Tape::new();
    let xv = tape.leaf(x.clone());
    let out = f(&mut tape, xv)?;
    let f0 = tape.value(out).item();
    let analytic = tape.backward_wrt(out, &[xv])?.remove(0);

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        max_rel_error_smooth: 0.0,
        worst_index: 0,
        non_smooth: Vec::new(),
        components: x.len(),
    };
    let mut probe = x.clone();
    for k in 0..x.len() {
        let orig = probe.data()[k];
        probe.data_mut()[k] = orig + h;
        let fp = eval(&f, &probe)?;
        probe.data_mut()[k] = orig - h;
        let fm = eval(&f, &probe)?;
        probe.data_mut()[k] = orig;

        let central = (fp - fm) / (2.0 * h);
        let forward = (fp - f0) / h;
        let backward = (f0 - fm) / h;
        let err = relative_error(analytic.data()[k], central);
        let kink = (forward - backward).abs() > 1e-3 * forward.abs().max(backward.abs()).max(1.0);

        if err > report.max_rel_error {
            report.max_rel_error = err;
            report.worst_index = k;
        }
        if kink {
            report.non_smooth.push(k);
        } else {
            report.max_rel_error_smooth = report.max_rel_error_smooth.max(err);
        }
    }
    Ok(report)
}
