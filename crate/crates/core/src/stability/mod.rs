//! Numerical stability diagnostics for flow trajectories.
//!
//! [`assess`] integrates a flow from given features and runs only the checks
//! that theory guarantees for that configuration; everything else it measures
//! goes into [`StabilityReport::info`].

mod metrics;
mod portrait;
mod spectral;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Tensor};
use crate::error::{Error, Result};
use crate::flows::{Activation, Coupling, Flow, FlowKind, PhaseState, VectorField};
use crate::graph::{Graph, NormMode};
use crate::integrators::{integrate, IntegrationConfig, Scheme, Trajectory};
use crate::nets::ParamStore;

pub use metrics::{
    column_sum_drift, dirichlet_energy, energy_drift, energy_series, lyapunov_trace, relative_drift, LyapunovTrace,
    MONOTONE_TOL,
};
pub use portrait::{
    example1_exact, example1_field, example1_portrait, example1_velocity, FieldSample, Portrait, PortraitConfig,
    TrajectorySample,
};
pub use spectral::{spectral_radius, spectral_radius_sparse, SpectralEstimate, POWER_ITERS, POWER_TOL};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub measured: f64,
    pub tolerance: f64,
}

impl Check {
    /// Passes when `measured ≤ tolerance`.
    pub fn at_most(name: &str, measured: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            pass: measured.is_finite() && measured <= tolerance,
            measured,
            tolerance,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StabilityReport {
    pub flow: FlowKind,
    pub checks: Vec<Check>,
    /// Measurements without a pass/fail claim.
    pub info: BTreeMap<String, f64>,
    /// Where the trajectory was written, if it was.
    pub trajectory: Option<String>,
}

impl StabilityReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StabilityConfig {
    pub t_end: f64,
    pub h: f64,
    pub scheme: Scheme,
    /// Horizon of the asymptotic-decay proxy.
    pub t_long: f64,
    /// Required `‖X(t_long)‖ / ‖X(0)‖`.
    pub decay_ratio: f64,
    pub monotone_tol: f64,
    pub energy_tol: f64,
    pub conservation_tol: f64,
    pub spectral_tol: f64,
    /// Tolerance on `|⟨∇H, f⟩| / (‖∇H‖‖f‖)` at recorded states.
    pub orthogonality_tol: f64,
    /// Relative slack on `V̇ ≤ 2(1 − α)V`.
    pub rate_tol: f64,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        Self {
            t_end: 3.0,
            h: 0.01,
            scheme: Scheme::Rk4,
            t_long: 20.0,
            decay_ratio: 1e-6,
            monotone_tol: MONOTONE_TOL,
            energy_tol: 1e-6,
            conservation_tol: 1e-8,
            spectral_tol: 1e-6,
            orthogonality_tol: 1e-10,
            rate_tol: 1e-6,
        }
    }
}

impl StabilityConfig {
    pub fn integration(&self) -> IntegrationConfig {
        IntegrationConfig::new(self.t_end, self.h, self.scheme)
    }
}

fn norm(t: &Tensor) -> f64 {
    t.data().iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `max_t (V̇ − 2(1 − α)V)/V` with `V̇ = 2⟨X, L(X)X⟩`.
fn lyapunov_rate_excess(flow: &Flow, params: &ParamStore, traj: &Trajectory, alpha: f64) -> Result<Option<f64>> {
    let mut worst = f64::NEG_INFINITY;
    for s in &traj.states {
        let mut tape = Tape::new();
        let bound = params.bind(&mut tape, false);
        let x = tape.constant(s.position.clone());
        let Some(l) = flow.generator(&mut tape, &bound, x)? else {
            return Ok(None);
        };
        let lx = tape.value(l).matmul(&s.position)?;
        let v = s.position.dot(&s.position)?;
        if v == 0.0 {
            continue;
        }
        let vdot = 2.0 * s.position.dot(&lx)?;
        worst = worst.max((vdot - 2.0 * (1.0 - alpha) * v) / v);
    }
    Ok(Some(if worst.is_finite() { worst } else { 0.0 }))
}

/// Worst `|⟨∇H, f⟩| / (‖∇H‖‖f‖)` over recorded states; `dH/dt` along the
/// field normalized by the sizes involved.
fn energy_rate(field: &dyn VectorField, params: &ParamStore, traj: &Trajectory) -> Result<Option<f64>> {
    let mut worst = 0.0f64;
    for s in &traj.states {
        let mut tape = Tape::new();
        let bound = params.bind(&mut tape, false);
        let leaves = s.to_leaves(&mut tape);
        let f = field.eval(&mut tape, &bound, &leaves)?.values(&tape);
        let Some(h) = field.energy(&mut tape, &bound, &leaves)? else {
            return Ok(None);
        };
        let mut wrt = vec![leaves.position];
        wrt.extend(leaves.momentum);
        let grads = tape.backward_wrt(h, &wrt)?;
        let g = PhaseState {
            position: grads[0].clone(),
            momentum: grads.get(1).cloned(),
        };
        let (gf, gv) = (g.flatten(), f.flatten());
        let inner: f64 = gf.iter().zip(&gv).map(|(a, b)| a * b).sum();
        let scale = (g.norm_sq() * f.norm_sq()).sqrt();
        if scale > 0.0 {
            worst = worst.max(inner.abs() / scale);
        }
    }
    Ok(Some(worst))
}

/// Spectral radius of the attention/diffusion matrix `L(X₀) + αI`.
fn attention_radius(flow: &Flow, params: &ParamStore, x0: &Tensor, alpha: f64) -> Result<Option<SpectralEstimate>> {
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape, false);
    let x = tape.constant(x0.clone());
    let Some(l) = flow.generator(&mut tape, &bound, x)? else {
        return Ok(None);
    };
    let l = tape.value(l);
    let a = l.add(&Tensor::identity(l.rows()).scale(alpha))?;
    spectral_radius(&a, POWER_ITERS, POWER_TOL).map(Some)
}

/// Integrates `flow` from `x0` (with `p(0) = q(0)` for partitioned flows)
/// and checks the properties the configuration is known to have:
///
/// * GRAND-nl (doubly stochastic), or GRAND-l with the symmetric
///   normalization, `α ≥ 1`: `V = ‖X‖²` non-increasing and `V̇ ≤ 2(1 − α)V`.
/// * GRAND, any stochastic attention: spectral radius 1.
/// * GRAND, `α > 1`: `‖X(t_long)‖ ≤ decay_ratio·‖X(0)‖`.
/// * GRAND-l column-stochastic, `α = 1`: column sums conserved.
/// * Fields with an energy (HANG, HANG-quad, fixed linear GraphCON with
///   `α = 0`): relative energy drift and `⟨∇H, f⟩ = 0`.
/// * Damped fixed linear GraphCON: energy non-increasing.
pub fn assess(
    flow: &Flow,
    params: &ParamStore,
    graph: &Graph,
    x0: &Tensor,
    cfg: &StabilityConfig,
) -> Result<(StabilityReport, Trajectory)> {
    if x0.rows() != graph.num_nodes() {
        return Err(Error::dim(
            "assess",
            format!("{} nodes but features have {} rows", graph.num_nodes(), x0.rows()),
        ));
    }
    let spec = &flow.spec;
    let state0 = if flow.partitioned() {
        PhaseState::pair(x0.clone(), x0.clone())
    } else {
        PhaseState::single(x0.clone())
    };
    let traj = integrate(flow, params, &state0, &cfg.integration())?;
    let mut checks = Vec::new();
    let mut info = BTreeMap::new();

    let trace = lyapunov_trace(&traj);
    let v0 = trace.values[0];
    info.insert("lyapunov_max_increase".into(), trace.max_increase);
    if v0 > 0.0 {
        info.insert("v_ratio".into(), trace.values.last().copied().unwrap_or(v0) / v0);
    }
    info.insert("column_sum_drift".into(), column_sum_drift(&traj));
    info.insert("dirichlet_initial".into(), dirichlet_energy(graph, x0)?);
    let x_end = &traj.final_state().expect("non-empty trajectory").position;
    info.insert("dirichlet_final".into(), dirichlet_energy(graph, x_end)?);
    if let Some(period) = graph.period() {
        info.insert("graph_period".into(), period as f64);
    }

    let is_grand = matches!(spec.kind, FlowKind::GrandL | FlowKind::GrandNl);
    if is_grand {
        let alpha = spec.alpha;
        let norm_bounded = spec.kind == FlowKind::GrandNl || spec.adjacency == NormMode::Symmetric;
        if norm_bounded && alpha >= 1.0 {
            checks.push(Check::at_most(
                "lyapunov_monotone",
                trace.max_increase,
                cfg.monotone_tol,
            ));
            if let Some(excess) = lyapunov_rate_excess(flow, params, &traj, alpha)? {
                checks.push(Check::at_most("lyapunov_rate_bound", excess, cfg.rate_tol));
            }
        }
        if let Some(est) = attention_radius(flow, params, x0, alpha)? {
            info.insert("spectral_iterations".into(), est.iterations as f64);
            checks.push(Check::at_most(
                "spectral_radius_one",
                (est.radius - 1.0).abs(),
                cfg.spectral_tol,
            ));
        }
        if alpha > 1.0 {
            let long = integrate(
                flow,
                params,
                &state0,
                &IntegrationConfig {
                    record_every: usize::MAX,
                    ..IntegrationConfig::new(cfg.t_long, cfg.h, cfg.scheme)
                },
            )?;
            let x_long = &long.final_state().expect("non-empty trajectory").position;
            let ratio = norm(x_long) / norm(x0).max(f64::MIN_POSITIVE);
            checks.push(Check::at_most("asymptotic_decay", ratio, cfg.decay_ratio));
        }
        if spec.kind == FlowKind::GrandL && spec.adjacency == NormMode::Column && alpha == 1.0 {
            checks.push(Check::at_most(
                "column_sum_conservation",
                column_sum_drift(&traj),
                cfg.conservation_tol,
            ));
        }
    }

    let conservative = match spec.kind {
        FlowKind::Hang | FlowKind::HangQuad => true,
        FlowKind::GraphCon => {
            spec.coupling == Coupling::Fixed && spec.activation == Activation::Identity && spec.alpha == 0.0
        }
        _ => false,
    };
    let damped_oscillator = spec.kind == FlowKind::GraphCon
        && spec.coupling == Coupling::Fixed
        && spec.activation == Activation::Identity
        && spec.alpha > 0.0;
    if conservative || damped_oscillator {
        let h = energy_series(flow, params, &traj)?;
        info.insert("energy_initial".into(), h[0]);
        if conservative {
            checks.push(Check::at_most("energy_drift", relative_drift(&h), cfg.energy_tol));
            if let Some(rate) = energy_rate(flow, params, &traj)? {
                checks.push(Check::at_most("energy_orthogonality", rate, cfg.orthogonality_tol));
            }
        } else {
            let rise = h.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
            checks.push(Check::at_most("energy_nonincreasing", rise, cfg.monotone_tol));
        }
    }

    Ok((
        StabilityReport {
            flow: spec.kind,
            checks,
            info,
            trajectory: None,
        },
        traj,
    ))
}
