use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Graph, NodeDataset, Split};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::rng;

/// Parameters of the stochastic block model benchmark.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SbmParams {
    pub n_per_class: usize,
    pub n_classes: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub feat_dim: usize,
    pub feat_shift: f64,
    pub seed: u64,
}

impl Default for SbmParams {
    fn default() -> Self {
        Self {
            n_per_class: 30,
            n_classes: 2,
            p_in: 0.3,
            p_out: 0.02,
            feat_dim: 8,
            feat_shift: 2.0,
            seed: 7,
        }
    }
}

/// Samples an SBM graph with Gaussian node features.
///
/// Node `i` has class `i / n_per_class`. Each unordered pair is joined with
/// probability `p_in` inside a class and `p_out` across classes. Features are
/// `N(μ_c, I)` where `μ_c` is zero except on the first axis, where it equals
/// `feat_shift · (c − (C−1)/2)`; for two classes this is `∓feat_shift/2`.
/// The split is the stratified 60/10/20 split.
pub fn generate_sbm(params: &SbmParams) -> Result<NodeDataset> {
    let SbmParams {
        n_per_class,
        n_classes,
        p_in,
        p_out,
        feat_dim,
        feat_shift,
        seed,
    } = *params;
    if n_per_class == 0 || n_classes == 0 || feat_dim == 0 {
        return Err(Error::InvalidArgument(
            "n_per_class, n_classes and feat_dim must be positive".into(),
        ));
    }
    if !(0.0 <= p_out && p_out <= p_in && p_in <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "need 0 <= p_out <= p_in <= 1, got p_in={p_in}, p_out={p_out}"
        )));
    }
    if !feat_shift.is_finite() {
        return Err(Error::InvalidArgument("feat_shift must be finite".into()));
    }

    let n = n_per_class * n_classes;
    let labels: Vec<usize> = (0..n).map(|i| i / n_per_class).collect();

    let mut rng_edges = rng::stream(seed, "sbm.edges");
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let p = if labels[u] == labels[v] { p_in } else { p_out };
            if rng_edges.random::<f64>() < p {
                edges.push((u, v, 1.0));
            }
        }
    }
    let graph = Graph::from_edges(n, &edges)?;

    let mut rng_feat = rng::stream(seed, "sbm.features");
    let centre = (n_classes as f64 - 1.0) / 2.0;
    let features = Tensor::from_fn(n, feat_dim, |i, j| {
        let noise: f64 = rng_feat.sample(StandardNormal);
        let mean = if j == 0 {
            feat_shift * (labels[i] as f64 - centre)
        } else {
            0.0
        };
        mean + noise
    });

    let split = Split::stratified(&labels, (0.6, 0.1, 0.2), seed)?;
    NodeDataset::new(graph, features, labels, n_classes, split)
}
