//! Entries of `G⁻¹` restricted to the filled pattern of a symmetric
//! factorization, computed with the Takahashi recurrences
//!
//! ```text
//! Z_ij = −Σ_k L_kj Z_ik              (i > j, i ∈ struct L(:, j))
//! Z_jj = 1/d_j − Σ_k L_kj Z_kj
//! ```
//!
//! processed from the last column to the first. Only `L` and the pivots `d`
//! of `G = L D Lᵀ` are needed; for a symmetric positive definite matrix the
//! diagonal-pivot LU gives exactly these (`U = D Lᵀ`).

use super::{LuFactorization, Pivoting, SparseError, SparseVec};

#[derive(Debug, Clone)]
pub struct SelectedInverse {
    n: usize,
    perm: Vec<usize>,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SelectedInverse {
    pub fn compute(fact: &LuFactorization) -> Result<Self, SparseError> {
        if fact.nrows() != fact.ncols() {
            return Err(SparseError::NotSquare {
                rows: fact.nrows(),
                cols: fact.ncols(),
            });
        }
        if !matches!(fact.options().pivoting, Pivoting::Diagonal) {
            return Err(SparseError::InvalidStructure(
                "selected inverse requires a diagonal-pivot factorization".into(),
            ));
        }
        let n = fact.ncols();
        let l = fact.lower();
        let d = fact.diagonal();

        // Z shares the pattern of L plus the diagonal, stored column-wise
        // with the diagonal first.
        let mut col_ptr = Vec::with_capacity(n + 1);
        col_ptr.push(0);
        let mut row_idx = Vec::with_capacity(l.nnz() + n);
        for j in 0..n {
            row_idx.push(j);
            row_idx.extend_from_slice(l.col(j).0);
            col_ptr.push(row_idx.len());
        }
        let mut values = vec![0.0; row_idx.len()];

        let lookup = |values: &[f64], a: usize, b: usize| -> Option<f64> {
            let (r, c) = if a >= b { (a, b) } else { (b, a) };
            let s = col_ptr[c];
            let e = col_ptr[c + 1];
            row_idx[s..e].binary_search(&r).ok().map(|p| values[s + p])
        };

        for j in (0..n).rev() {
            let (rows, lvals) = l.col(j);
            let base = col_ptr[j];
            for (a, &i) in rows.iter().enumerate() {
                let mut s = 0.0;
                for (b, &k) in rows.iter().enumerate() {
                    let z = lookup(&values, i, k).ok_or_else(|| {
                        SparseError::InvalidStructure(format!(
                            "entry ({i}, {k}) missing from the filled pattern"
                        ))
                    })?;
                    s += lvals[b] * z;
                }
                values[base + 1 + a] = -s;
            }
            let mut diag = 1.0 / d[j];
            for (b, _) in rows.iter().enumerate() {
                diag -= lvals[b] * values[base + 1 + b];
            }
            values[base] = diag;
        }
        Ok(Self {
            n,
            perm: fact.row_position().to_vec(),
            col_ptr,
            row_idx,
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `(G⁻¹)_ij` in original numbering, if it lies in the filled pattern.
    pub fn entry(&self, i: usize, j: usize) -> Option<f64> {
        let (a, b) = (self.perm[i], self.perm[j]);
        let (r, c) = if a >= b { (a, b) } else { (b, a) };
        let s = self.col_ptr[c];
        let e = self.col_ptr[c + 1];
        self.row_idx[s..e].binary_search(&r).ok().map(|p| self.values[s + p])
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }
}

#[derive(Debug, Clone, Default)]
pub struct QuadformResult {
    /// `aᵀ G⁻¹ a` for every input row.
    pub values: Vec<f64>,
    /// Rows whose support left the filled pattern and were handled by a
    /// full solve instead.
    pub fallbacks: Vec<usize>,
}

/// Diagonal of `J G⁻¹ Jᵀ` for the given rows of `J`, using the selected
/// inverse where possible and a sparse solve otherwise.
pub fn diag_quadform(fact: &LuFactorization, zinv: &SelectedInverse, rows: &[SparseVec]) -> QuadformResult {
    let mut out = QuadformResult {
        values: Vec::with_capacity(rows.len()),
        fallbacks: Vec::new(),
    };
    let mut merged: Vec<(usize, f64)> = Vec::new();
    for (r, row) in rows.iter().enumerate() {
        merged.clear();
        merged.extend(row.iter());
        merged.sort_unstable_by_key(|e| e.0);
        merged.dedup_by(|b, a| {
            if a.0 == b.0 {
                a.1 += b.1;
                true
            } else {
                false
            }
        });
        let mut s = 0.0;
        let mut ok = true;
        'outer: for (a, &(p, vp)) in merged.iter().enumerate() {
            for &(q, vq) in &merged[a..] {
                match zinv.entry(p, q) {
                    Some(z) => s += if p == q { vp * vp * z } else { 2.0 * vp * vq * z },
                    None => {
                        ok = false;
                        break 'outer;
                    }
                }
            }
        }
        if !ok {
            let mut dense = vec![0.0; zinv.dim()];
            for &(p, v) in &merged {
                dense[p] = v;
            }
            let x = fact.solve(&dense);
            s = merged.iter().map(|&(p, v)| v * x[p]).sum();
            out.fallbacks.push(r);
        }
        out.values.push(s);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::{CscMatrix, LuOptions};

    #[test]
    fn diagonal_matrix_quadform() {
        let g = CscMatrix::from_dense(&[vec![2.0, 0.0], vec![0.0, 4.0]]);
        let f = LuFactorization::factor_with(&g, LuOptions::symmetric()).unwrap();
        let z = SelectedInverse::compute(&f).unwrap();
        let mut row = SparseVec::new();
        row.push(0, 1.0);
        row.push(1, 1.0);
        let mut unit = SparseVec::new();
        unit.push(1, 1.0);
        let q = diag_quadform(&f, &z, &[row, unit]);
        // (0,1) is outside the pattern of a diagonal matrix, so the first row
        // takes the fallback path.
        assert!((q.values[0] - 0.75).abs() < 1e-15);
        assert!((q.values[1] - 0.25).abs() < 1e-15);
        assert_eq!(q.fallbacks, vec![0]);
    }

    #[test]
    fn tridiagonal_inverse_entries() {
        // G = [[2,-1,0],[-1,2,-1],[0,-1,2]], G⁻¹ = 1/4 [[3,2,1],[2,4,2],[1,2,3]]
        let g = CscMatrix::from_dense(&[
            vec![2.0, -1.0, 0.0],
            vec![-1.0, 2.0, -1.0],
            vec![0.0, -1.0, 2.0],
        ]);
        let f = LuFactorization::factor_with(&g, LuOptions::symmetric()).unwrap();
        let z = SelectedInverse::compute(&f).unwrap();
        assert!((z.entry(0, 0).unwrap() - 0.75).abs() < 1e-14);
        assert!((z.entry(1, 1).unwrap() - 1.0).abs() < 1e-14);
        assert!((z.entry(1, 0).unwrap() - 0.5).abs() < 1e-14);
        assert!((z.entry(2, 1).unwrap() - 0.5).abs() < 1e-14);
    }
}
