use log::warn;
use rand::Rng;
use serde::Serialize;

use crate::autodiff::{CsrMatrix, Tensor};
use crate::error::{Error, Result};
use crate::rng;

/// Iteration cap for [`spectral_radius`].
pub const POWER_ITERS: usize = 10_000;
pub const POWER_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpectralEstimate {
    pub radius: f64,
    pub iterations: usize,
    /// `false` when the cap was hit; `radius` is then the last estimate.
    pub converged: bool,
}

/// Spectral radius by power iteration from a fixed pseudo-random start.
///
/// The estimate is the modulus of the Rayleigh quotient. For entrywise
/// non-negative matrices the iteration runs on `(M + I)/2`, whose Perron
/// root `(ρ + 1)/2` strictly dominates every other eigenvalue, so periodic
/// matrices (e.g. walks on bipartite graphs) still converge.
pub fn spectral_radius(m: &Tensor, max_iters: usize, tol: f64) -> Result<SpectralEstimate> {
    if m.rows() != m.cols() {
        return Err(Error::dim(
            "spectral_radius",
            format!("matrix must be square, got {}x{}", m.rows(), m.cols()),
        ));
    }
    let n = m.rows();
    let nonnegative = m.data().iter().all(|&v| v >= 0.0);
    power_iteration(n, nonnegative, max_iters, tol, |x, out| {
        for (i, o) in out.iter_mut().enumerate() {
            *o = m.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
        }
    })
}

pub fn spectral_radius_sparse(m: &CsrMatrix, max_iters: usize, tol: f64) -> Result<SpectralEstimate> {
    if m.rows() != m.cols() {
        return Err(Error::dim(
            "spectral_radius",
            format!("matrix must be square, got {}x{}", m.rows(), m.cols()),
        ));
    }
    let nonnegative = m.triplets().iter().all(|&(_, _, v)| v >= 0.0);
    power_iteration(m.rows(), nonnegative, max_iters, tol, |x, out| {
        for (i, o) in out.iter_mut().enumerate() {
            *o = m.row(i).map(|(j, a)| a * x[j]).sum();
        }
    })
}

fn power_iteration(
    n: usize,
    shift: bool,
    max_iters: usize,
    tol: f64,
    matvec: impl Fn(&[f64], &mut [f64]),
) -> Result<SpectralEstimate> {
    if n == 0 {
        return Err(Error::InvalidArgument("spectral radius of an empty matrix".into()));
    }
    let mut r = rng::stream(0, "power_iteration");
    let mut x: Vec<f64> = (0..n).map(|_| r.random_range(0.5..1.5)).collect();
    normalize(&mut x);
    let mut y = vec![0.0; n];
    let apply = |x: &[f64], y: &mut [f64]| {
        matvec(x, y);
        if shift {
            for (yi, xi) in y.iter_mut().zip(x) {
                *yi = 0.5 * (*yi + xi);
            }
        }
    };
    let unshift = |mu: f64| if shift { (2.0 * mu - 1.0).abs() } else { mu.abs() };

    let mut mu = 0.0;
    for it in 1..=max_iters {
        apply(&x, &mut y);
        mu = dot(&x, &y);
        let residual = y
            .iter()
            .zip(&x)
            .map(|(yi, xi)| (yi - mu * xi).powi(2))
            .sum::<f64>()
            .sqrt();
        if !mu.is_finite() || !residual.is_finite() {
            return Err(Error::Numeric {
                op: "spectral_radius".into(),
            });
        }
        if residual <= tol * mu.abs().max(1.0) {
            return Ok(SpectralEstimate {
                radius: unshift(mu),
                iterations: it,
                converged: true,
            });
        }
        let norm = normalize(&mut y);
        if norm == 0.0 {
            // `x` lies in the kernel, so the start vector only sees the zero eigenvalue.
            return Ok(SpectralEstimate {
                radius: unshift(0.0),
                iterations: it,
                converged: true,
            });
        }
        std::mem::swap(&mut x, &mut y);
    }
    warn!(
        "power iteration did not converge in {max_iters} iterations; last estimate {}",
        unshift(mu)
    );
    Ok(SpectralEstimate {
        radius: unshift(mu),
        iterations: max_iters,
        converged: false,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(x: &mut [f64]) -> f64 {
    let norm = dot(x, x).sqrt();
    if norm > 0.0 {
        x.iter_mut().for_each(|v| *v /= norm);
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{normalize_adjacency, Graph, NormMode};
    use crate::nets::sinkhorn_normalize;
    use proptest::prelude::*;
    use rand::Rng;

    fn radius(m: &Tensor) -> f64 {
        let est = spectral_radius(m, POWER_ITERS, POWER_TOL).unwrap();
        assert!(est.converged, "{est:?}");
        est.radius
    }

    #[test]
    fn hand_cases() {
        assert!((radius(&Tensor::identity(4)) - 1.0).abs() < 1e-12);
        let ex1 = Tensor::new(2, 2, vec![-1.0, 0.0, 0.0, -5.0]).unwrap();
        assert!((radius(&ex1) - 5.0).abs() < 1e-9);
        assert!(radius(&Tensor::zeros(3, 3)).abs() < 1e-12);
        assert!(spectral_radius(&Tensor::zeros(2, 3), 10, 1e-9).is_err());
    }

    #[test]
    fn bipartite_walk_matrix_converges() {
        // A path on 4 nodes is bipartite: its walk matrix has eigenvalues ±1.
        let g = Graph::from_edges(4, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)]).unwrap();
        let a = normalize_adjacency(&g, NormMode::Row);
        let est = spectral_radius_sparse(&a, POWER_ITERS, POWER_TOL).unwrap();
        assert!(est.converged);
        assert!((est.radius - 1.0).abs() < 1e-9);
    }

    #[test]
    fn iteration_cap_is_reported() {
        let m = Tensor::new(2, 2, vec![1.0, 0.0, 0.0, -0.999]).unwrap();
        let est = spectral_radius(&m, 3, 1e-14).unwrap();
        assert!(!est.converged);
        assert_eq!(est.iterations, 3);
        assert!(est.radius.is_finite());
    }

    #[test]
    fn known_symmetric_spectrum() {
        // Eigenvalues of [[2, 1], [1, 2]] are 1 and 3.
        let m = Tensor::new(2, 2, vec![2.0, 1.0, 1.0, 2.0]).unwrap();
        assert!((radius(&m) - 3.0).abs() < 1e-9);
        assert!((radius(&m.scale(-1.0)) - 3.0).abs() < 1e-9);
    }

    fn random_connected(n: usize, p: f64, seed: u64) -> Graph {
        let mut r = rng::stream(seed, "graph");
        let mut edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1, r.random_range(0.5..2.0))).collect();
        for u in 0..n {
            for v in u + 2..n {
                if r.random::<f64>() < p {
                    edges.push((u, v, r.random_range(0.5..2.0)));
                }
            }
        }
        Graph::from_edges(n, &edges).unwrap()
    }

    proptest! {
        #[test]
        fn stochastic_normalizations_have_unit_radius(n in 2usize..16, p in 0.0f64..0.6, seed in 0u64..500) {
            let g = random_connected(n, p, seed);
            for mode in [NormMode::Row, NormMode::Column, NormMode::Symmetric] {
                let est = spectral_radius_sparse(&normalize_adjacency(&g, mode), POWER_ITERS, POWER_TOL).unwrap();
                prop_assert!(est.converged);
                prop_assert!((est.radius - 1.0).abs() <= 1e-6, "{:?} {}", mode, est.radius);
            }
        }

        #[test]
        fn sinkhorn_outputs_have_unit_radius(n in 2usize..10, seed in 0u64..500) {
            let mut r = rng::stream(seed, "m");
            let m = Tensor::from_fn(n, n, |_, _| r.random_range(0.01..3.0));
            let (s, _) = sinkhorn_normalize(&m, 200, 1e-12).unwrap();
            prop_assert!((radius(&s) - 1.0).abs() <= 1e-6);
        }
    }
}
