//! Compressed sparse row matrices.
//!
//! `indptr[i]..indptr[i+1]` indexes the stored entries of row `i` in
//! `indices` (column ids, sorted ascending) and `values`.

use std::sync::Arc;

use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut sorted: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for &(r, c, v) in triplets {
            if r >= rows || c >= cols {
                return Err(Error::dim(
                    "CsrMatrix::from_triplets",
                    format!("entry ({r},{c}) outside {rows}x{cols}"),
                ));
            }
            sorted.push((r, c, v));
        }
        sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

        let mut indptr = vec![0usize; rows + 1];
        let mut indices = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in sorted {
            if last == Some((r, c)) {
                *values.last_mut().expect("entry present") += v;
                continue;
            }
            indices.push(c);
            values.push(v);
            indptr[r + 1] += 1;
            last = Some((r, c));
        }
        for i in 0..rows {
            indptr[i + 1] += indptr[i];
        }
        Ok(Self {
            rows,
            cols,
            indptr,
            indices,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Stored `(col, value)` pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[i]..self.indptr[i + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let span = self.indptr[i]..self.indptr[i + 1];
        match self.indices[span.clone()].binary_search(&j) {
            Ok(k) => self.values[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.rows)
            .flat_map(|i| self.row(i).map(move |(j, v)| (i, j, v)))
            .collect()
    }

    pub fn transpose(&self) -> Self {
        let t: Vec<_> = self.triplets().into_iter().map(|(i, j, v)| (j, i, v)).collect();
        Self::from_triplets(self.cols, self.rows, &t).expect("transpose stays in bounds")
    }

    /// Dense product `self · x`.
    pub fn matmul_dense(&self, x: &Tensor) -> Result<Tensor> {
        if self.cols != x.rows() {
            return Err(Error::dim(
                "sparse_matmul",
                format!("{}x{} sparse times {:?}", self.rows, self.cols, x.shape()),
            ));
        }
        let m = x.cols();
        let mut out = Tensor::zeros(self.rows, m);
        for i in 0..self.rows {
            for (j, v) in self.row(i) {
                let src = x.row(j);
                for (o, &s) in out.row_mut(i).iter_mut().zip(src) {
                    *o += v * s;
                }
            }
        }
        Ok(out)
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).map(|(_, v)| v).sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (&j, &v) in self.indices.iter().zip(&self.values) {
            out[j] += v;
        }
        out
    }

    pub fn to_dense(&self) -> Tensor {
        let mut t = Tensor::zeros(self.rows, self.cols);
        for (i, j, v) in self.triplets() {
            t.set(i, j, v);
        }
        t
    }
}

/// A sparse matrix paired with its transpose, as consumed by
/// `sparse_matmul` on the tape (the transpose drives the backward rule).
#[derive(Clone, Debug)]
pub struct SparseOperator {
    forward: Arc<CsrMatrix>,
    adjoint: Arc<CsrMatrix>,
}

impl SparseOperator {
    pub fn new(matrix: CsrMatrix) -> Self {
        let adjoint = Arc::new(matrix.transpose());
        Self {
            forward: Arc::new(matrix),
            adjoint,
        }
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.forward
    }

    pub fn adjoint(&self) -> &CsrMatrix {
        &self.adjoint
    }

    /// The operator for the transposed matrix.
    pub fn transposed(&self) -> Self {
        Self {
            forward: Arc::clone(&self.adjoint),
            adjoint: Arc::clone(&self.forward),
        }
    }
}
