//! Fixed-step integrators over [`PhaseState`]s.
//!
//! One step is always recorded on a [`Tape`], so the same code serves plain
//! simulation (a fresh tape per step, parameters held constant) and training
//! (all steps unrolled on one tape).

mod trajectory;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::flows::{PhaseState, VectorField};
use crate::nets::{BoundParams, ParamStore};

pub use trajectory::Trajectory;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Euler,
    Rk4,
    /// Momentum first from the current position, then position from the
    /// new momentum.
    SymplecticEuler,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Euler => "euler",
            Scheme::Rk4 => "rk4",
            Scheme::SymplecticEuler => "symplectic_euler",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegrationConfig {
    /// Requested horizon `T`.
    pub t_end: f64,
    /// Step size `h`.
    pub h: f64,
    pub scheme: Scheme,
    /// Keep every `record_every`-th state (the last is always kept).
    pub record_every: usize,
    pub max_steps: usize,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        Self {
            t_end: 3.0,
            h: 1.0,
            scheme: Scheme::Euler,
            record_every: 1,
            max_steps: 1_000_000,
        }
    }
}

impl IntegrationConfig {
    pub fn new(t_end: f64, h: f64, scheme: Scheme) -> Self {
        Self {
            t_end,
            h,
            scheme,
            ..Self::default()
        }
    }

    /// Number of steps: the largest `n` with `n·h ≤ T` (up to rounding).
    pub fn num_steps(&self) -> Result<usize> {
        if !(self.t_end > 0.0) || !(self.h > 0.0) || !self.t_end.is_finite() || !self.h.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "need T > 0 and h > 0, got T={}, h={}",
                self.t_end, self.h
            )));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidArgument("record_every must be at least 1".into()));
        }
        let n = (self.t_end / self.h + 1e-9).floor();
        if n > self.max_steps as f64 {
            return Err(Error::InvalidArgument(format!(
                "T/h = {n} steps exceeds the budget of {}",
                self.max_steps
            )));
        }
        Ok(n as usize)
    }
}

fn axpy(tape: &mut Tape, x: Var, c: f64, d: Var) -> Result<Var> {
    let hd = tape.scale(d, c)?;
    tape.add(x, hd)
}

fn state_axpy(tape: &mut Tape, s: &PhaseState<Var>, c: f64, d: &PhaseState<Var>) -> Result<PhaseState<Var>> {
    let position = axpy(tape, s.position, c, d.position)?;
    let momentum = match (s.momentum, d.momentum) {
        (Some(m), Some(dm)) => Some(axpy(tape, m, c, dm)?),
        (None, None) => None,
        _ => return Err(Error::Contract("field changed the state layout".into())),
    };
    Ok(PhaseState { position, momentum })
}

/// One step of `scheme` from `state`, recorded on `tape`.
pub fn step_on_tape(
    field: &dyn VectorField,
    tape: &mut Tape,
    params: &BoundParams,
    state: &PhaseState<Var>,
    h: f64,
    scheme: Scheme,
) -> Result<PhaseState<Var>> {
    match scheme {
        Scheme::Euler => {
            let d = field.eval(tape, params, state)?;
            state_axpy(tape, state, h, &d)
        }
        Scheme::Rk4 => {
            let k1 = field.eval(tape, params, state)?;
            let s2 = state_axpy(tape, state, h / 2.0, &k1)?;
            let k2 = field.eval(tape, params, &s2)?;
            let s3 = state_axpy(tape, state, h / 2.0, &k2)?;
            let k3 = field.eval(tape, params, &s3)?;
            let s4 = state_axpy(tape, state, h, &k3)?;
            let k4 = field.eval(tape, params, &s4)?;
            let mut out = state_axpy(tape, state, h / 6.0, &k1)?;
            out = state_axpy(tape, &out, h / 3.0, &k2)?;
            out = state_axpy(tape, &out, h / 3.0, &k3)?;
            state_axpy(tape, &out, h / 6.0, &k4)
        }
        Scheme::SymplecticEuler => {
            let p = *state
                .momentum
                .as_ref()
                .ok_or_else(|| Error::Contract("symplectic Euler needs a partitioned (q, p) state".into()))?;
            let d1 = field.eval(tape, params, state)?;
            let p_next = axpy(tape, p, h, *d1.momentum_or_err()?)?;
            let mid = PhaseState::pair(state.position, p_next);
            let d2 = field.eval(tape, params, &mid)?;
            let q_next = axpy(tape, state.position, h, d2.position)?;
            Ok(PhaseState::pair(q_next, p_next))
        }
    }
}

fn tag_step(step: usize) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::Numeric { op } => Error::Numeric {
            op: format!("step {step}: {op}"),
        },
        other => other,
    }
}

fn check_layout(field: &dyn VectorField, state: &PhaseState<Tensor>, scheme: Scheme) -> Result<()> {
    if scheme == Scheme::SymplecticEuler && !state.is_partitioned() {
        return Err(Error::Contract(
            "symplectic Euler needs a partitioned (q, p) state".into(),
        ));
    }
    if field.partitioned() != state.is_partitioned() {
        return Err(Error::Contract(format!(
            "field {} expects a {} state",
            field.name(),
            if field.partitioned() {
                "partitioned"
            } else {
                "single-block"
            }
        )));
    }
    Ok(())
}

/// Unrolls all steps on `tape` and returns the final state.
pub fn integrate_on_tape(
    field: &dyn VectorField,
    tape: &mut Tape,
    params: &BoundParams,
    state0: &PhaseState<Var>,
    cfg: &IntegrationConfig,
) -> Result<PhaseState<Var>> {
    let n = cfg.num_steps()?;
    let mut state = state0.clone();
    for k in 0..n {
        state = step_on_tape(field, tape, params, &state, cfg.h, cfg.scheme).map_err(tag_step(k))?;
    }
    Ok(state)
}

/// Energy of `state` under `field`, if the field defines one.
pub fn field_energy(field: &dyn VectorField, params: &ParamStore, state: &PhaseState<Tensor>) -> Result<Option<f64>> {
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape, false);
    let s = state.map(|t| tape.constant(t.clone()));
    Ok(field.energy(&mut tape, &bound, &s)?.map(|h| tape.value(h).item()))
}

/// Integrates from `state0` with parameters held fixed and records the
/// trajectory with diagnostics `V = ‖X‖²`, `column_sum_residual` and, for
/// fields that define one, the energy `H`.
pub fn integrate(
    field: &dyn VectorField,
    params: &ParamStore,
    state0: &PhaseState<Tensor>,
    cfg: &IntegrationConfig,
) -> Result<Trajectory> {
    let n = cfg.num_steps()?;
    check_layout(field, state0, cfg.scheme)?;
    let final_time = n as f64 * cfg.h;
    if (cfg.t_end - final_time).abs() > 1e-9 * cfg.t_end.max(1.0) {
        warn!(
            "horizon {} is not a multiple of h={}; stopping at t={final_time}",
            cfg.t_end, cfg.h
        );
    }

    let col0 = state0.position.col_sums();
    let mut traj = Trajectory::new(cfg.t_end);
    let record = |traj: &mut Trajectory, t: f64, s: &PhaseState<Tensor>| -> Result<()> {
        let residual = s.position.col_sums().sub(&col0)?.max_abs();
        let mut diag = vec![
            ("V".to_string(), s.position.data().iter().map(|v| v * v).sum::<f64>()),
            ("column_sum_residual".to_string(), residual),
        ];
        if let Some(h) = field_energy(field, params, s)? {
            diag.push(("H".to_string(), h));
        }
        traj.push(t, s.clone(), diag.into_iter().collect());
        Ok(())
    };

    record(&mut traj, 0.0, state0)?;
    let mut state = state0.clone();
    for k in 0..n {
        let mut tape = Tape::new();
        let bound = params.bind(&mut tape, false);
        let s = state.to_leaves(&mut tape);
        let next = step_on_tape(field, &mut tape, &bound, &s, cfg.h, cfg.scheme).map_err(tag_step(k))?;
        state = next.values(&tape);
        if !state.is_finite() {
            return Err(Error::Numeric {
                op: format!("step {k}: state"),
            });
        }
        if (k + 1) % cfg.record_every == 0 || k + 1 == n {
            record(&mut traj, (k + 1) as f64 * cfg.h, &state)?;
        }
    }
    Ok(traj)
}

/// Errors of one scheme against a closed form at several step sizes.
#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    pub scheme: Scheme,
    pub step_sizes: Vec<f64>,
    pub errors: Vec<f64>,
    /// Least-squares slope of `ln(error)` against `ln(h)`.
    pub order: f64,
}

pub const CONVERGENCE_STEPS: [f64; 4] = [0.1, 0.05, 0.025, 0.0125];

/// Empirical order of `scheme` at time `t_end` over [`CONVERGENCE_STEPS`];
/// the error is the Euclidean norm of the difference to `exact(t_end)`.
pub fn convergence_order(
    field: &dyn VectorField,
    params: &ParamStore,
    state0: &PhaseState<Tensor>,
    exact: impl Fn(f64) -> PhaseState<Tensor>,
    scheme: Scheme,
    t_end: f64,
) -> Result<ConvergenceReport> {
    let reference = exact(t_end);
    let mut errors = Vec::with_capacity(CONVERGENCE_STEPS.len());
    for &h in &CONVERGENCE_STEPS {
        let cfg = IntegrationConfig {
            record_every: usize::MAX,
            ..IntegrationConfig::new(t_end, h, scheme)
        };
        let traj = integrate(field, params, state0, &cfg)?;
        let last = traj.states.last().expect("trajectory has the initial state");
        let err: f64 = last
            .flatten()
            .iter()
            .zip(reference.flatten())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        errors.push(err);
    }
    let xs: Vec<f64> = CONVERGENCE_STEPS.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let order = least_squares_slope(&xs, &ys);
    Ok(ConvergenceReport {
        scheme,
        step_sizes: CONVERGENCE_STEPS.to_vec(),
        errors,
        order,
    })
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}
