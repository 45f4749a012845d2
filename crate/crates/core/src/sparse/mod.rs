//! Compressed sparse column matrices and the factorizations built on them.
//!
//! Everything numeric in the crate goes through [`CscMatrix`]: admittance and
//! susceptance matrices, Jacobians, gain matrices and LP bases. Patterns are
//! assembled once through a [`PatternMap`] so that later value updates can be
//! scattered into the same storage without reallocation.

mod lu;
mod ordering;
mod qr;
mod selinv;

pub use lu::{FactorStats, LuFactorization, LuOptions, Pivoting};
pub use ordering::{minimum_degree, Ordering};
pub use qr::QrFactorization;
pub use selinv::{diag_quadform, QuadformResult, SelectedInverse};

use num_traits::Zero;
use std::ops::{AddAssign, Mul};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SparseError {
    #[error("invalid sparse structure: {0}")]
    InvalidStructure(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix must be square (got {rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("singular pivot in column {column}")]
    SingularPivot { column: usize },
    #[error("refactorization pivot in column {column} is unstable ({pivot:e})")]
    UnstablePivot { column: usize, pivot: f64 },
    #[error("nonzero pattern differs from the factored matrix")]
    PatternMismatch,
    #[error("rank deficient: column {column} has |R_ii| = {pivot:e}")]
    RankDeficient { column: usize, pivot: f64 },
    #[error("matrix is not positive definite at column {column}")]
    NotPositiveDefinite { column: usize },
}

/// Sparse matrix in compressed sparse column layout with sorted row indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix<T> {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Copy + Zero + AddAssign + Mul<Output = T>> CscMatrix<T> {
    /// Builds a matrix from raw arrays, validating every structural invariant.
    pub fn new(
        nrows: usize,
        ncols: usize,
        col_ptr: Vec<usize>,
        row_idx: Vec<usize>,
        values: Vec<T>,
    ) -> Result<Self, SparseError> {
        if col_ptr.len() != ncols + 1 || col_ptr[0] != 0 {
            return Err(SparseError::InvalidStructure(
                "column pointer array has wrong length or start".into(),
            ));
        }
        if row_idx.len() != values.len() || *col_ptr.last().unwrap() != row_idx.len() {
            return Err(SparseError::InvalidStructure(
                "index and value arrays disagree with column pointers".into(),
            ));
        }
        for j in 0..ncols {
            if col_ptr[j] > col_ptr[j + 1] {
                return Err(SparseError::InvalidStructure(format!(
                    "column pointers decrease at column {j}"
                )));
            }
            let rows = &row_idx[col_ptr[j]..col_ptr[j + 1]];
            for (p, &r) in rows.iter().enumerate() {
                if r >= nrows {
                    return Err(SparseError::InvalidStructure(format!(
                        "row index {r} out of range in column {j}"
                    )));
                }
                if p > 0 && rows[p - 1] >= r {
                    return Err(SparseError::InvalidStructure(format!(
                        "row indices not strictly increasing in column {j}"
                    )));
                }
            }
        }
        Ok(Self {
            nrows,
            ncols,
            col_ptr,
            row_idx,
            values,
        })
    }

    pub(crate) fn from_parts_unchecked(
        nrows: usize,
        ncols: usize,
        col_ptr: Vec<usize>,
        row_idx: Vec<usize>,
        values: Vec<T>,
    ) -> Self {
        debug_assert_eq!(col_ptr.len(), ncols + 1);
        Self {
            nrows,
            ncols,
            col_ptr,
            row_idx,
            values,
        }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self::from_parts_unchecked(nrows, ncols, vec![0; ncols + 1], Vec::new(), Vec::new())
    }

    pub fn identity(n: usize) -> Self
    where
        T: num_traits::One,
    {
        Self::from_parts_unchecked(n, n, (0..=n).collect(), (0..n).collect(), vec![T::one(); n])
    }

    /// Assembles from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, T)],
    ) -> Result<Self, SparseError> {
        let coords: Vec<(usize, usize)> = triplets.iter().map(|&(r, c, _)| (r, c)).collect();
        let (map, mut m) = PatternMap::build::<T>(nrows, ncols, &coords)?;
        for (t, &(_, _, v)) in triplets.iter().enumerate() {
            m.values[map.slot(t)] += v;
        }
        Ok(m)
    }

    pub fn from_dense(rows: &[Vec<T>]) -> Self
    where
        T: PartialEq,
    {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut trip = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != T::zero() {
                    trip.push((i, j, v));
                }
            }
        }
        Self::from_triplets(nrows, ncols, &trip).expect("dense input is well formed")
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_idx(&self) -> &[usize] {
        &self.row_idx
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    /// Row indices and values of column `j`.
    pub fn col(&self, j: usize) -> (&[usize], &[T]) {
        let (a, b) = (self.col_ptr[j], self.col_ptr[j + 1]);
        (&self.row_idx[a..b], &self.values[a..b])
    }

    /// Storage position of entry `(i, j)` if it is part of the pattern.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let (a, b) = (self.col_ptr[j], self.col_ptr[j + 1]);
        self.row_idx[a..b].binary_search(&i).ok().map(|p| a + p)
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.position(i, j).map_or(T::zero(), |p| self.values[p])
    }

    pub fn same_pattern<U>(&self, other: &CscMatrix<U>) -> bool {
        self.nrows == other.nrows
            && self.ncols == other.ncols
            && self.col_ptr == other.col_ptr
            && self.row_idx == other.row_idx
    }

    /// Computes `y = A x`.
    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.ncols);
        let mut y = vec![T::zero(); self.nrows];
        for j in 0..self.ncols {
            let xj = x[j];
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                y[self.row_idx[p]] += self.values[p] * xj;
            }
        }
        y
    }

    /// Computes `y = Aᵀ x` (no conjugation).
    pub fn tr_mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.nrows);
        (0..self.ncols)
            .map(|j| {
                let mut s = T::zero();
                for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                    s += self.values[p] * x[self.row_idx[p]];
                }
                s
            })
            .collect()
    }

    pub fn transpose(&self) -> Self {
        let mut count = vec![0usize; self.nrows + 1];
        for &r in &self.row_idx {
            count[r + 1] += 1;
        }
        for i in 0..self.nrows {
            count[i + 1] += count[i];
        }
        let col_ptr = count.clone();
        let mut next = count;
        let mut row_idx = vec![0; self.nnz()];
        let mut values = vec![T::zero(); self.nnz()];
        for j in 0..self.ncols {
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                let r = self.row_idx[p];
                let q = next[r];
                next[r] += 1;
                row_idx[q] = j;
                values[q] = self.values[p];
            }
        }
        Self::from_parts_unchecked(self.ncols, self.nrows, col_ptr, row_idx, values)
    }

    /// Selects columns in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Self {
        let mut col_ptr = Vec::with_capacity(cols.len() + 1);
        col_ptr.push(0);
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        for &c in cols {
            let (r, v) = self.col(c);
            row_idx.extend_from_slice(r);
            values.extend_from_slice(v);
            col_ptr.push(row_idx.len());
        }
        Self::from_parts_unchecked(self.nrows, cols.len(), col_ptr, row_idx, values)
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut d = vec![vec![T::zero(); self.ncols]; self.nrows];
        for j in 0..self.ncols {
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                d[self.row_idx[p]][j] = self.values[p];
            }
        }
        d
    }

    /// Sets every stored value to zero, keeping the pattern.
    pub fn clear_values(&mut self) {
        self.values.iter_mut().for_each(|v| *v = T::zero());
    }

    pub fn map<U, F: Fn(T) -> U>(&self, f: F) -> CscMatrix<U> {
        CscMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            col_ptr: self.col_ptr.clone(),
            row_idx: self.row_idx.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

impl CscMatrix<f64> {
    /// Computes `AᵀA` with the pattern of the structural product.
    pub fn gram(&self) -> CscMatrix<f64> {
        let at = self.transpose();
        let mut trip = Vec::new();
        for i in 0..self.nrows {
            let (cols, vals) = at.col(i);
            for (a, &p) in cols.iter().enumerate() {
                for (b, &q) in cols.iter().enumerate() {
                    trip.push((p, q, vals[a] * vals[b]));
                }
            }
        }
        Self::from_triplets(self.ncols, self.ncols, &trip).expect("gram pattern")
    }

    pub fn norm_inf(&self) -> f64 {
        let mut rows = vec![0.0f64; self.nrows];
        for (p, &r) in self.row_idx.iter().enumerate() {
            rows[r] += self.values[p].abs();
        }
        rows.into_iter().fold(0.0, f64::max)
    }
}

/// Maps a list of `(row, col)` coordinates onto storage slots of a compressed
/// pattern, so repeated assemblies can scatter values without searching.
#[derive(Debug, Clone)]
pub struct PatternMap {
    slots: Vec<usize>,
}

impl PatternMap {
    pub fn build<T: Copy + Zero + AddAssign + Mul<Output = T>>(
        nrows: usize,
        ncols: usize,
        coords: &[(usize, usize)],
    ) -> Result<(Self, CscMatrix<T>), SparseError> {
        for &(r, c) in coords {
            if r >= nrows || c >= ncols {
                return Err(SparseError::InvalidStructure(format!(
                    "coordinate ({r}, {c}) outside {nrows}x{ncols}"
                )));
            }
        }
        let mut order: Vec<usize> = (0..coords.len()).collect();
        order.sort_unstable_by_key(|&t| (coords[t].1, coords[t].0));
        let mut slots = vec![0; coords.len()];
        let mut col_ptr = vec![0; ncols + 1];
        let mut row_idx: Vec<usize> = Vec::new();
        let mut last: Option<(usize, usize)> = None;
        for &t in &order {
            let (r, c) = coords[t];
            if last != Some((r, c)) {
                row_idx.push(r);
                col_ptr[c + 1] += 1;
                last = Some((r, c));
            }
            slots[t] = row_idx.len() - 1;
        }
        for j in 0..ncols {
            col_ptr[j + 1] += col_ptr[j];
        }
        let nnz = row_idx.len();
        let m = CscMatrix::from_parts_unchecked(nrows, ncols, col_ptr, row_idx, vec![T::zero(); nnz]);
        Ok((Self { slots }, m))
    }

    /// Storage slot of the `t`-th coordinate passed to [`PatternMap::build`].
    pub fn slot(&self, t: usize) -> usize {
        self.slots[t]
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }
}

/// Sparse vector as parallel index/value lists (indices need not be sorted).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseVec {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseVec {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, i: usize, v: f64) {
        self.indices.push(i);
        self.values.push(v);
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn dot_dense(&self, x: &[f64]) -> f64 {
        self.iter().map(|(i, v)| v * x[i]).sum()
    }
}
