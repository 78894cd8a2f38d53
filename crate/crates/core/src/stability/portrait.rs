//! Phase portrait of the linear system `ẋ = diag(−1, −5)x`.
//!
//! Every trajectory converges to the origin, so the system is globally
//! asymptotically stable, yet all of them flatten onto the `x₁` axis: a
//! perturbation of `x₁(0)` survives far longer than one of `x₂(0)`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::flows::LinearField;

pub const RATES: [f64; 2] = [1.0, 5.0];

/// `ẋ = diag(−1, −5)x` as a [`LinearField`] on 2×1 states.
pub fn example1_field() -> LinearField {
    LinearField {
        matrix: Tensor::new(2, 2, vec![-RATES[0], 0.0, 0.0, -RATES[1]]).expect("2x2"),
    }
}

/// `x(t) = x₁(0)e^{−t}e₁ + x₂(0)e^{−5t}e₂`.
pub fn example1_exact(start: [f64; 2], t: f64) -> [f64; 2] {
    [start[0] * (-RATES[0] * t).exp(), start[1] * (-RATES[1] * t).exp()]
}

/// Adding `0.0` maps `−0.0` to `0.0`, so the origin reads as exactly zero.
pub fn example1_velocity(x: [f64; 2]) -> [f64; 2] {
    [-RATES[0] * x[0] + 0.0, -RATES[1] * x[1] + 0.0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PortraitConfig {
    /// The grid covers `[−extent, extent]²`.
    pub extent: f64,
    /// Points per axis; odd counts put a grid point on the origin.
    pub grid_n: usize,
    pub starts: Vec<[f64; 2]>,
    /// Trajectory sample times.
    pub times: Vec<f64>,
}

impl Default for PortraitConfig {
    fn default() -> Self {
        Self {
            extent: 2.0,
            grid_n: 21,
            starts: vec![
                [1.0, 1.0],
                [-1.0, 1.0],
                [1.0, -1.0],
                [-1.0, -1.0],
                [2.0, 0.5],
                [0.0, 1.0],
                [0.5, -2.0],
            ],
            times: (0..=50).map(|k| k as f64 * 0.1).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FieldSample {
    pub x1: f64,
    pub x2: f64,
    pub dx1: f64,
    pub dx2: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TrajectorySample {
    pub start: usize,
    pub t: f64,
    pub x1: f64,
    pub x2: f64,
}

#[derive(Clone, Debug, Default)]
pub struct Portrait {
    pub field: Vec<FieldSample>,
    pub trajectories: Vec<TrajectorySample>,
}

pub fn example1_portrait(cfg: &PortraitConfig) -> Result<Portrait> {
    if cfg.grid_n < 2 {
        return Err(Error::InvalidArgument(format!(
            "grid_n must be at least 2, got {}",
            cfg.grid_n
        )));
    }
    if !(cfg.extent > 0.0 && cfg.extent.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "extent must be positive, got {}",
            cfg.extent
        )));
    }
    let step = 2.0 * cfg.extent / (cfg.grid_n - 1) as f64;
    // The middle index of an odd grid is exactly 0.
    let coord = |i: usize| {
        let c = -cfg.extent + i as f64 * step;
        if 2 * i + 1 == cfg.grid_n {
            0.0
        } else {
            c
        }
    };
    let mut field = Vec::with_capacity(cfg.grid_n * cfg.grid_n);
    for i in 0..cfg.grid_n {
        for j in 0..cfg.grid_n {
            let x = [coord(i), coord(j)];
            let [dx1, dx2] = example1_velocity(x);
            field.push(FieldSample {
                x1: x[0],
                x2: x[1],
                dx1,
                dx2,
            });
        }
    }
    let mut trajectories = Vec::with_capacity(cfg.starts.len() * cfg.times.len());
    for (k, &start) in cfg.starts.iter().enumerate() {
        for &t in &cfg.times {
            let [x1, x2] = example1_exact(start, t);
            trajectories.push(TrajectorySample { start: k, t, x1, x2 });
        }
    }
    Ok(Portrait { field, trajectories })
}

impl Portrait {
    pub fn write_field_csv<W: Write>(&self, out: W) -> Result<()> {
        write_rows(out, &self.field)
    }

    pub fn write_trajectories_csv<W: Write>(&self, out: W) -> Result<()> {
        write_rows(out, &self.trajectories)
    }
}

fn write_rows<W: Write, T: Serialize>(out: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io("portrait csv", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_is_an_equilibrium_on_the_grid() {
        let p = example1_portrait(&PortraitConfig::default()).unwrap();
        assert_eq!(p.field.len(), 21 * 21);
        let origin = p.field.iter().find(|s| s.x1 == 0.0 && s.x2 == 0.0).unwrap();
        assert_eq!((origin.dx1, origin.dx2), (0.0, 0.0));
    }

    #[test]
    fn closed_form_endpoint() {
        let [x1, x2] = example1_exact([0.0, 1.0], 1.0);
        assert_eq!(x1, 0.0);
        assert_eq!(x2, (-5.0f64).exp());
    }

    #[test]
    fn trajectories_flatten_onto_the_first_axis() {
        // Direction of travel: |ẋ₂/ẋ₁| = 5|x₂(0)/x₁(0)|e^{−4t}.
        let slope = |t: f64| {
            let v = example1_velocity(example1_exact([1.0, 1.0], t));
            (v[1] / v[0]).abs()
        };
        assert!((slope(0.0) - 5.0).abs() < 1e-12);
        assert!(slope(3.0) < 5.0 * (-12.0f64).exp() * (1.0 + 1e-9));
        assert!(slope(5.0) < 1e-7);
    }

    #[test]
    fn csv_columns() {
        let cfg = PortraitConfig {
            grid_n: 3,
            starts: vec![[1.0, 1.0]],
            times: vec![0.0, 1.0],
            ..PortraitConfig::default()
        };
        let p = example1_portrait(&cfg).unwrap();
        let mut buf = Vec::new();
        p.write_field_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some("x1,x2,dx1,dx2"));
        assert!(text.lines().any(|l| l == "0.0,0.0,0.0,0.0"), "{text}");
        let mut buf = Vec::new();
        p.write_trajectories_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert_eq!(text.lines().next(), Some("start,t,x1,x2"));
    }

    #[test]
    fn degenerate_grid_is_rejected() {
        let cfg = PortraitConfig {
            grid_n: 1,
            ..PortraitConfig::default()
        };
        assert!(example1_portrait(&cfg).is_err());
    }
}
