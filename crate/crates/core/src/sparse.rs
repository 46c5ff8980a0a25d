//! Compressed sparse row matrices.

use std::sync::Arc;

use crate::error::{Error, Result};

/// CSR matrix. Column indices are strictly increasing within each row; the
/// index arrays are shared between matrices assembled on the same pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_offsets: Arc<[usize]>,
    col_indices: Arc<[usize]>,
    values: Vec<f64>,
}

/// Sparsity pattern shared by several matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Pattern {
    pub nrows: usize,
    pub ncols: usize,
    pub row_offsets: Arc<[usize]>,
    pub col_indices: Arc<[usize]>,
}

impl Pattern {
    /// Builds a pattern from (row, col) pairs; duplicates are merged.
    pub fn from_pairs(nrows: usize, ncols: usize, mut pairs: Vec<(usize, usize)>) -> Self {
        pairs.sort_unstable();
        pairs.dedup();
        let mut row_offsets = vec![0usize; nrows + 1];
        for &(r, _) in &pairs {
            row_offsets[r + 1] += 1;
        }
        for i in 0..nrows {
            row_offsets[i + 1] += row_offsets[i];
        }
        let col_indices: Vec<usize> = pairs.into_iter().map(|(_, c)| c).collect();
        Pattern {
            nrows,
            ncols,
            row_offsets: row_offsets.into(),
            col_indices: col_indices.into(),
        }
    }

    pub fn nnz(&self) -> usize {
        self.col_indices.len()
    }

    /// Storage position of entry `(row, col)`, if present.
    #[inline]
    pub fn position(&self, row: usize, col: usize) -> Option<usize> {
        let (a, b) = (self.row_offsets[row], self.row_offsets[row + 1]);
        self.col_indices[a..b].binary_search(&col).ok().map(|k| a + k)
    }

    pub fn zeros(&self) -> SparseMatrix {
        SparseMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_offsets: Arc::clone(&self.row_offsets),
            col_indices: Arc::clone(&self.col_indices),
            values: vec![0.0; self.nnz()],
        }
    }
}

impl SparseMatrix {
    /// Builds a matrix from triplets, summing duplicates in input order.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        if let Some(&(r, c, _)) = triplets.iter().find(|&&(r, c, _)| r >= nrows || c >= ncols) {
            return Err(Error::Domain(format!("triplet ({r}, {c}) outside {nrows}x{ncols}")));
        }
        let pattern = Pattern::from_pairs(nrows, ncols, triplets.iter().map(|&(r, c, _)| (r, c)).collect());
        let mut m = pattern.zeros();
        for &(r, c, v) in triplets {
            let k = pattern.position(r, c).expect("pattern built from triplets");
            m.values[k] += v;
        }
        Ok(m)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn pattern(&self) -> Pattern {
        Pattern {
            nrows: self.nrows,
            ncols: self.ncols,
            row_offsets: Arc::clone(&self.row_offsets),
            col_indices: Arc::clone(&self.col_indices),
        }
    }

    pub fn same_pattern(&self, other: &SparseMatrix) -> bool {
        self.nrows == other.nrows
            && self.ncols == other.ncols
            && (Arc::ptr_eq(&self.col_indices, &other.col_indices)
                || (self.row_offsets == other.row_offsets && self.col_indices == other.col_indices))
    }

    /// Entries of row `i` as `(col, value)`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.row_offsets[i], self.row_offsets[i + 1]);
        self.col_indices[a..b].iter().copied().zip(self.values[a..b].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.row_offsets[i], self.row_offsets[i + 1]);
        match self.col_indices[a..b].binary_search(&j) {
            Ok(k) => self.values[a + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    /// `A^T x`.
    pub fn transpose_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for (i, &xi) in x.iter().enumerate() {
            for (j, v) in self.row(i) {
                y[j] += v * xi;
            }
        }
        y
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut t: Vec<(usize, usize, f64)> = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            t.extend(self.row(i).map(|(j, v)| (j, i, v)));
        }
        SparseMatrix::from_triplets(self.ncols, self.nrows, &t).expect("in range")
    }

    /// `self += alpha * other`; both must share a pattern.
    pub fn add_scaled(&mut self, alpha: f64, other: &SparseMatrix) {
        assert!(self.same_pattern(other), "add_scaled needs matching patterns");
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
    }

    /// `sum_k coeffs[k] * mats[k]` for matrices sharing a pattern.
    pub fn linear_combination(terms: &[(f64, &SparseMatrix)]) -> SparseMatrix {
        let (_, first) = terms[0];
        let mut out = first.pattern().zeros();
        for &(a, m) in terms {
            out.add_scaled(a, m);
        }
        out
    }

    pub fn scale(&mut self, alpha: f64) {
        self.values.iter_mut().for_each(|v| *v *= alpha);
    }

    /// Largest absolute entrywise difference `|A_ij - A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest entrywise difference against a matrix of any pattern.
    pub fn max_abs_diff(&self, other: &SparseMatrix) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                worst = worst.max((v - other.get(i, j)).abs());
            }
            for (j, v) in other.row(i) {
                worst = worst.max((v - self.get(i, j)).abs());
            }
        }
        worst
    }

    /// `x^T A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        (0..self.nrows)
            .map(|i| x[i] * self.row(i).map(|(j, v)| v * y[j]).sum::<f64>())
            .sum()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] += v;
            }
        }
        d
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}
