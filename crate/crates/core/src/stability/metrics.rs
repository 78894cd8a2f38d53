use serde::Serialize;

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::flows::VectorField;
use crate::graph::Graph;
use crate::integrators::{field_energy, Trajectory};
use crate::nets::ParamStore;

/// Allowed per-step increase of `V` before a trace counts as increasing.
pub const MONOTONE_TOL: f64 = 1e-9;

/// `V(t) = ‖X(t)‖²` over a trajectory.
#[derive(Clone, Debug, Serialize)]
pub struct LyapunovTrace {
    pub values: Vec<f64>,
    /// Largest `V(t_{i+1}) − V(t_i)`; negative for strictly decreasing traces.
    pub max_increase: f64,
    pub monotone_nonincreasing: bool,
}

pub fn lyapunov_trace(traj: &Trajectory) -> LyapunovTrace {
    let values: Vec<f64> = traj
        .states
        .iter()
        .map(|s| s.position.data().iter().map(|v| v * v).sum())
        .collect();
    let max_increase = values.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    let max_increase = if values.len() < 2 { 0.0 } else { max_increase };
    LyapunovTrace {
        monotone_nonincreasing: max_increase <= MONOTONE_TOL,
        max_increase,
        values,
    }
}

/// Worst relative deviation from the first value.
pub fn relative_drift(values: &[f64]) -> f64 {
    let Some(&h0) = values.first() else {
        return 0.0;
    };
    let scale = h0.abs().max(1e-12);
    values.iter().map(|h| (h - h0).abs() / scale).fold(0.0, f64::max)
}

/// The field's energy at every recorded state.
pub fn energy_series(field: &dyn VectorField, params: &ParamStore, traj: &Trajectory) -> Result<Vec<f64>> {
    traj.states
        .iter()
        .map(|s| {
            field_energy(field, params, s)?
                .ok_or_else(|| Error::Contract(format!("field {} defines no energy", field.name())))
        })
        .collect()
}

/// `max |H(t) − H(0)| / max(|H(0)|, 1e-12)` with `H` recomputed from
/// `field` and `params`.
pub fn energy_drift(field: &dyn VectorField, params: &ParamStore, traj: &Trajectory) -> Result<f64> {
    Ok(relative_drift(&energy_series(field, params, traj)?))
}

/// `(1/|V|) Σᵢ Σ_{j∈N(i)} ‖qᵢ − qⱼ‖²`; neighbours are unweighted.
pub fn dirichlet_energy(graph: &Graph, q: &Tensor) -> Result<f64> {
    let n = graph.num_nodes();
    if q.rows() != n {
        return Err(Error::dim(
            "dirichlet_energy",
            format!("{n} nodes but features have {} rows", q.rows()),
        ));
    }
    if n == 0 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for i in 0..n {
        let qi = q.row(i);
        for (j, w) in graph.neighbors(i) {
            if w > 0.0 && j != i {
                total += qi.iter().zip(q.row(j)).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
            }
        }
    }
    Ok(total / n as f64)
}

/// `max_t ‖1ᵀX(t) − 1ᵀX(0)‖∞`.
pub fn column_sum_drift(traj: &Trajectory) -> f64 {
    let Some(first) = traj.states.first() else {
        return 0.0;
    };
    let c0 = first.position.col_sums();
    traj.states
        .iter()
        .map(|s| {
            s.position
                .col_sums()
                .data()
                .iter()
                .zip(c0.data())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}
