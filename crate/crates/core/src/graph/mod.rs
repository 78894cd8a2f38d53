//! Undirected weighted graphs, adjacency normalizations, datasets and a
//! stochastic block model generator.

mod dataset;
mod edgelist;
mod sbm;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::autodiff::{CsrMatrix, Tensor};
use crate::error::{Error, Result};

pub use dataset::{NodeDataset, Split};
pub use edgelist::{load_edge_list, save_edge_list};
pub use sbm::{generate_sbm, SbmParams};

/// Immutable undirected graph with non-negative weights.
///
/// The adjacency is stored symmetrically: `W[u,v] == W[v,u]` for every edge.
/// A self-loop `(u,u,w)` is stored once with weight `w`.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    adjacency: CsrMatrix,
}

impl Graph {
    /// Builds the symmetric graph from undirected edges; repeated edges
    /// (in either orientation) have their weights summed.
    pub fn from_edges(num_nodes: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut triplets = Vec::with_capacity(2 * edges.len());
        for &(u, v, w) in edges {
            if u >= num_nodes || v >= num_nodes {
                return Err(Error::InvalidArgument(format!(
                    "edge ({u},{v}) outside node range 0..{num_nodes}"
                )));
            }
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "edge ({u},{v}) has weight {w}; weights must be finite and non-negative"
                )));
            }
            triplets.push((u, v, w));
            if u != v {
                triplets.push((v, u, w));
            }
        }
        let adjacency = CsrMatrix::from_triplets(num_nodes, num_nodes, &triplets)?;
        Ok(Self { adjacency })
    }

    pub fn empty(num_nodes: usize) -> Self {
        Self {
            adjacency: CsrMatrix::from_triplets(num_nodes, num_nodes, &[]).expect("empty graph"),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.adjacency.rows()
    }

    /// Number of undirected edges, self-loops included.
    pub fn num_edges(&self) -> usize {
        self.edges().len()
    }

    pub fn adjacency(&self) -> &CsrMatrix {
        &self.adjacency
    }

    pub fn weight(&self, u: usize, v: usize) -> f64 {
        self.adjacency.get(u, v)
    }

    /// `(neighbor, weight)` pairs of node `u`, sorted by neighbor.
    pub fn neighbors(&self, u: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.adjacency.row(u)
    }

    /// Weighted degree.
    pub fn degree(&self, u: usize) -> f64 {
        self.neighbors(u).map(|(_, w)| w).sum()
    }

    /// Canonical undirected edge list `(u, v, w)` with `u <= v`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        self.adjacency
            .triplets()
            .into_iter()
            .filter(|&(u, v, _)| u <= v)
            .collect()
    }

    pub fn to_dense(&self) -> Tensor {
        self.adjacency.to_dense()
    }

    /// Graph from a dense symmetric weight matrix (entries `> 0` become edges).
    pub fn from_dense(w: &Tensor) -> Result<Self> {
        if w.rows() != w.cols() {
            return Err(Error::dim(
                "Graph::from_dense",
                format!("{:?} is not square", w.shape()),
            ));
        }
        let mut edges = Vec::new();
        for u in 0..w.rows() {
            for v in u..w.cols() {
                if (w.get(u, v) - w.get(v, u)).abs() > 0.0 {
                    return Err(Error::InvalidArgument(format!("matrix is not symmetric at ({u},{v})")));
                }
                if w.get(u, v) != 0.0 {
                    edges.push((u, v, w.get(u, v)));
                }
            }
        }
        Self::from_edges(w.rows(), &edges)
    }

    /// Connected component id of every node, numbered in order of first node.
    pub fn components(&self) -> Vec<usize> {
        let n = self.num_nodes();
        let mut comp = vec![usize::MAX; n];
        let mut next = 0;
        for start in 0..n {
            if comp[start] != usize::MAX {
                continue;
            }
            comp[start] = next;
            let mut queue = VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                for (v, _) in self.neighbors(u) {
                    if comp[v] == usize::MAX {
                        comp[v] = next;
                        queue.push_back(v);
                    }
                }
            }
            next += 1;
        }
        comp
    }

    pub fn is_connected(&self) -> bool {
        self.components().iter().all(|&c| c == 0)
    }

    /// Period of the random walk on a connected graph: the gcd of the
    /// lengths of its closed walks. Returns `None` when disconnected or
    /// without edges.
    ///
    /// Every edge gives a closed walk of length 2, so the period is 1 when
    /// there is an odd cycle or a self-loop and 2 when the graph is bipartite.
    pub fn period(&self) -> Option<usize> {
        let n = self.num_nodes();
        if n == 0 || !self.is_connected() || self.adjacency.nnz() == 0 {
            return None;
        }
        let mut level = vec![usize::MAX; n];
        level[0] = 0;
        let mut queue = VecDeque::from([0]);
        let mut odd = false;
        while let Some(u) = queue.pop_front() {
            for (v, _) in self.neighbors(u) {
                if level[v] == usize::MAX {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                } else if level[v] % 2 == level[u] % 2 {
                    odd = true;
                }
            }
        }
        Some(if odd { 1 } else { 2 })
    }
}

/// Which side the degree matrix multiplies on in [`normalize_adjacency`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMode {
    /// `D⁻¹W`: every row sums to 1.
    Row,
    /// `WD⁻¹`: every column sums to 1.
    Column,
    /// `D^{-1/2} W D^{-1/2}`.
    Symmetric,
}

/// Degree-normalized adjacency. Nodes of zero degree receive a unit
/// self-loop first.
pub fn normalize_adjacency(g: &Graph, mode: NormMode) -> CsrMatrix {
    let n = g.num_nodes();
    let mut triplets = g.adjacency().triplets();
    for u in 0..n {
        if g.degree(u) == 0.0 {
            triplets.push((u, u, 1.0));
        }
    }
    scale_by_degree(n, triplets, mode)
}

/// `D̃^{-1/2}(W + I)D̃^{-1/2}` with `D̃` the degrees of `W + I`.
pub fn gcn_adjacency(g: &Graph) -> CsrMatrix {
    let n = g.num_nodes();
    let mut triplets = g.adjacency().triplets();
    triplets.extend((0..n).map(|u| (u, u, 1.0)));
    scale_by_degree(n, triplets, NormMode::Symmetric)
}

fn scale_by_degree(n: usize, triplets: Vec<(usize, usize, f64)>, mode: NormMode) -> CsrMatrix {
    let merged = CsrMatrix::from_triplets(n, n, &triplets).expect("indices come from a graph");
    let deg = merged.row_sums();
    let scaled: Vec<_> = merged
        .triplets()
        .into_iter()
        .map(|(i, j, w)| {
            let s = match mode {
                NormMode::Row => w / deg[i],
                NormMode::Column => w / deg[j],
                NormMode::Symmetric => w / (deg[i] * deg[j]).sqrt(),
            };
            (i, j, s)
        })
        .collect();
    CsrMatrix::from_triplets(n, n, &scaled).expect("indices come from a graph")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn path3() -> Graph {
        Graph::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap()
    }

    #[test]
    fn single_edge_row_normalization_is_swap() {
        let g = Graph::from_edges(2, &[(0, 1, 1.0)]).unwrap();
        let a = normalize_adjacency(&g, NormMode::Row).to_dense();
        assert_eq!(a.data(), &[0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn path_column_mode_columns_sum_to_one() {
        let a = normalize_adjacency(&path3(), NormMode::Column).to_dense();
        // Oracle: W D^-1 built by hand. Degrees (1,2,1).
        let expected = [0.0, 0.5, 0.0, 1.0, 0.0, 1.0, 0.0, 0.5, 0.0];
        assert_eq!(a.data(), &expected);
        for s in a.col_sums().data() {
            assert_eq!(*s, 1.0);
        }
    }

    #[test]
    fn isolated_node_gets_self_loop() {
        let g = Graph::from_edges(4, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        for mode in [NormMode::Row, NormMode::Column, NormMode::Symmetric] {
            let a = normalize_adjacency(&g, mode).to_dense();
            assert_eq!(a.row(3), &[0.0, 0.0, 0.0, 1.0]);
        }
    }

    #[test]
    fn invalid_weights_are_rejected() {
        assert!(Graph::from_edges(2, &[(0, 1, -1.0)]).is_err());
        assert!(Graph::from_edges(2, &[(0, 1, f64::NAN)]).is_err());
        assert!(Graph::from_edges(2, &[(0, 2, 1.0)]).is_err());
    }

    #[test]
    fn period_distinguishes_bipartite() {
        assert_eq!(path3().period(), Some(2));
        let tri = Graph::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap();
        assert_eq!(tri.period(), Some(1));
        let looped = Graph::from_edges(2, &[(0, 1, 1.0), (1, 1, 1.0)]).unwrap();
        assert_eq!(looped.period(), Some(1));
        assert_eq!(Graph::empty(3).period(), None);
    }

    #[test]
    fn gcn_adjacency_of_path() {
        let a = gcn_adjacency(&path3()).to_dense();
        // W+I degrees (2,3,2)
        let s6 = 1.0 / 6f64.sqrt();
        let expected = [0.5, s6, 0.0, s6, 1.0 / 3.0, s6, 0.0, s6, 0.5];
        for (x, y) in a.data().iter().zip(expected) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    fn arb_graph() -> impl Strategy<Value = Graph> {
        (1usize..9).prop_flat_map(|n| {
            proptest::collection::vec((0..n, 0..n, 0.1f64..3.0), 0..20)
                .prop_map(move |e| Graph::from_edges(n, &e).unwrap())
        })
    }

    proptest! {
        #[test]
        fn normalized_rows_and_columns_are_stochastic(g in arb_graph()) {
            let row = normalize_adjacency(&g, NormMode::Row);
            for s in row.row_sums() {
                prop_assert!((s - 1.0).abs() < 1e-12);
            }
            let col = normalize_adjacency(&g, NormMode::Column);
            for s in col.col_sums() {
                prop_assert!((s - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn adjacency_is_symmetric(g in arb_graph()) {
            let d = g.to_dense();
            prop_assert_eq!(d.transpose(), d);
        }
    }
}
