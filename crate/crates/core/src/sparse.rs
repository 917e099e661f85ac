//! Compressed sparse row matrix for link-by-link interaction coefficients.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseMatrix {
    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            n,
            row_ptr: (0..=n).collect(),
            cols: (0..n).collect(),
            vals: vec![1.0; n],
        }
    }

    /// Builds an `n x n` matrix from (row, col, value) triplets. Explicit
    /// zeros are dropped; repeated positions are an error.
    pub fn from_triplets(n: usize, triplets: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut entries: Vec<(usize, usize, f64)> = triplets.into_iter().collect();
        for &(r, c, v) in &entries {
            if r >= n || c >= n {
                return Err(Error::InvalidWeights(format!(
                    "entry ({}, {}) outside a {n} x {n} matrix",
                    r + 1,
                    c + 1
                )));
            }
            if !v.is_finite() {
                return Err(Error::InvalidWeights(format!(
                    "entry ({}, {}) is not finite",
                    r + 1,
                    c + 1
                )));
            }
        }
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        for pair in entries.windows(2) {
            if pair[0].0 == pair[1].0 && pair[0].1 == pair[1].1 {
                return Err(Error::InvalidWeights(format!(
                    "entry ({}, {}) appears twice",
                    pair[0].0 + 1,
                    pair[0].1 + 1
                )));
            }
        }
        entries.retain(|e| e.2 != 0.0);
        let mut row_ptr = vec![0; n + 1];
        for &(r, _, _) in &entries {
            row_ptr[r + 1] += 1;
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(SparseMatrix {
            n,
            row_ptr,
            cols: entries.iter().map(|e| e.1).collect(),
            vals: entries.iter().map(|e| e.2).collect(),
        })
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut triplets = Vec::new();
        for (r, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidWeights(format!(
                    "row {} has {} entries, expected {n}",
                    r + 1,
                    row.len()
                )));
            }
            triplets.extend(row.iter().enumerate().map(|(c, &v)| (r, c, v)));
        }
        Self::from_triplets(n, triplets)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }

    pub fn row_cols(&self, r: usize) -> &[usize] {
        &self.cols[self.row_ptr[r]..self.row_ptr[r + 1]]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[span.clone()].binary_search(&c) {
            Ok(pos) => self.vals[span.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn row_sum(&self, r: usize) -> f64 {
        self.row(r).map(|(_, v)| v).sum()
    }

    pub fn row_dot(&self, r: usize, x: &[f64]) -> f64 {
        self.row(r).map(|(c, v)| v * x[c]).sum()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|r| self.row_dot(r, x)).collect()
    }

    /// `Aᵀ x`.
    pub fn tr_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                out[c] += v * x[r];
            }
        }
        out
    }

    pub fn transpose(&self) -> SparseMatrix {
        let triplets = self.triplets().map(|(r, c, v)| (c, r, v));
        // Transposing a valid matrix cannot produce duplicates.
        SparseMatrix::from_triplets(self.n, triplets).expect("transpose of a valid matrix")
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn is_symmetric(&self) -> bool {
        self.triplets().all(|(r, c, v)| self.get(c, r) == v)
    }

    pub fn is_identity(&self) -> bool {
        self.nnz() == self.n && (0..self.n).all(|r| self.row_cols(r) == [r] && self.vals[r] == 1.0)
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.n).all(|r| self.row_cols(r).iter().all(|&c| c == r))
    }

    /// Applies `f(row, col, value)` to every stored entry and rebuilds.
    pub fn map(&self, mut f: impl FnMut(usize, usize, f64) -> f64) -> SparseMatrix {
        let mut out = self.clone();
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                out.vals[k] = f(r, self.cols[k], self.vals[k]);
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (r, c, v) in self.triplets() {
            m[(r, c)] = v;
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_access() {
        let m = SparseMatrix::from_dense(&[vec![0.7, 0.3], vec![0.1, 0.9]]).unwrap();
        assert_eq!(m.get(0, 1), 0.3);
        assert_eq!(m.transpose().get(0, 1), 0.1);
        assert_eq!(m.mul_vec(&[1.0, 2.0]), vec![0.7 + 0.6, 0.1 + 1.8]);
        assert_eq!(m.tr_mul_vec(&[1.0, 2.0]), vec![0.7 + 0.2, 0.3 + 1.8]);
        assert!(!m.is_symmetric());
        assert!(SparseMatrix::identity(3).is_identity());
    }

    #[test]
    fn duplicate_entries_rejected() {
        assert!(SparseMatrix::from_triplets(2, [(0, 0, 1.0), (0, 0, 2.0)]).is_err());
        assert!(SparseMatrix::from_triplets(2, [(0, 2, 1.0)]).is_err());
    }
}
