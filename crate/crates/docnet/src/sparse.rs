//! Compressed sparse row matrices.
//!
//! Sparse operands are read-only once built: graph adjacency in its various
//! normalizations, and the document-term matrix.

use crate::matrix::DenseMatrix;
use crate::scalar::Scalar;

/// CSR matrix. Column indices are sorted within each row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<S: Scalar> {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<S>,
}

impl<S: Scalar> CsrMatrix<S> {
    /// Build from (row, col, value) triplets. Triplets are sorted; duplicate
    /// coordinates are summed.
    pub fn from_triplets(rows: usize, cols: usize, mut triplets: Vec<(usize, usize, S)>) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0usize; rows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<S> = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            debug_assert!(r < rows && c < cols);
            if indptr[r + 1] > indptr[r]
                && *indices.last().unwrap() == c
                && indices.len() == indptr[r + 1]
            {
                let last = values.len() - 1;
                values[last] += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
            }
        }
        // prefix sums
        for r in 0..rows {
            indptr[r + 1] += indptr[r];
        }
        Self {
            rows,
            cols,
            indptr,
            indices,
            values,
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

    /// (column, value) pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, S)> + '_ {
        let lo = self.indptr[i];
        let hi = self.indptr[i + 1];
        self.indices[lo..hi]
            .iter()
            .zip(&self.values[lo..hi])
            .map(|(&c, &v)| (c, v))
    }

    pub fn get(&self, i: usize, j: usize) -> S {
        let lo = self.indptr[i];
        let hi = self.indptr[i + 1];
        match self.indices[lo..hi].binary_search(&j) {
            Ok(k) => self.values[lo + k],
            Err(_) => S::zero(),
        }
    }

    /// `self * dense` -> dense.
    pub fn matmul_dense(&self, dense: &DenseMatrix<S>) -> DenseMatrix<S> {
        assert_eq!(self.cols, dense.rows(), "spmm shape mismatch");
        let d = dense.cols();
        let mut out = DenseMatrix::zeros(self.rows, d);
        for i in 0..self.rows {
            for (j, v) in self.row(i) {
                let src = dense.row(j);
                let dst = out.row_mut(i);
                for (o, &x) in dst.iter_mut().zip(src) {
                    *o += v * x;
                }
            }
        }
        out
    }

    /// `self^T * dense` computed by scattering rows; used for spmm backward.
    pub fn transpose_matmul_dense(&self, dense: &DenseMatrix<S>) -> DenseMatrix<S> {
        assert_eq!(self.rows, dense.rows(), "spmm^T shape mismatch");
        let d = dense.cols();
        let mut out = DenseMatrix::zeros(self.cols, d);
        for i in 0..self.rows {
            let src = dense.row(i);
            for (j, v) in self.row(i) {
                let dst = out.row_mut(j);
                for (o, &x) in dst.iter_mut().zip(src) {
                    *o += v * x;
                }
            }
        }
        out
    }

    pub fn to_dense(&self) -> DenseMatrix<S> {
        let mut out = DenseMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for (j, v) in self.row(i) {
                out.set(i, j, v);
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}
