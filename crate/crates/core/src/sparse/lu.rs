use super::{CscMatrix, Ordering, SparseError};
use serde::{Deserialize, Serialize};

const NONE: usize = usize::MAX;

/// Pivot selection rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pivoting {
    /// Threshold partial pivoting: the diagonal candidate is kept when its
    /// magnitude is at least `threshold` times the largest candidate.
    Partial { threshold: f64 },
    /// Always pivot on the (symmetrically permuted) diagonal. Intended for
    /// symmetric positive definite matrices.
    Diagonal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LuOptions {
    pub ordering: Ordering,
    pub pivoting: Pivoting,
}

impl Default for LuOptions {
    fn default() -> Self {
        Self {
            ordering: Ordering::MinimumDegree,
            pivoting: Pivoting::Partial { threshold: 1e-3 },
        }
    }
}

impl LuOptions {
    pub fn symmetric() -> Self {
        Self {
            ordering: Ordering::MinimumDegree,
            pivoting: Pivoting::Diagonal,
        }
    }

    pub fn with_ordering(mut self, ordering: Ordering) -> Self {
        self.ordering = ordering;
        self
    }
}

/// Counters describing how a factorization object has been produced and
/// reused. A refactorization never allocates new pattern storage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorStats {
    pub symbolic_analyses: usize,
    pub numeric_factorizations: usize,
    pub refactorizations: usize,
    pub pattern_allocations: usize,
}

/// `P A Q = L U` for a sparse matrix with at least as many rows as columns.
///
/// `L` is unit lower trapezoidal (the unit diagonal is implicit) and `U` is
/// square upper triangular. Both are stored in permuted numbering.
#[derive(Debug, Clone)]
pub struct LuFactorization {
    nrows: usize,
    ncols: usize,
    col_order: Vec<usize>,
    row_pos: Vec<usize>,
    l: CscMatrix<f64>,
    u: CscMatrix<f64>,
    a_col_ptr: Vec<usize>,
    a_row_idx: Vec<usize>,
    options: LuOptions,
    stats: FactorStats,
    work: Vec<f64>,
}

impl LuFactorization {
    pub fn factor(a: &CscMatrix<f64>) -> Result<Self, SparseError> {
        Self::factor_with(a, LuOptions::default())
    }

    pub fn factor_with(a: &CscMatrix<f64>, options: LuOptions) -> Result<Self, SparseError> {
        let (m, n) = (a.nrows(), a.ncols());
        if m < n {
            return Err(SparseError::DimensionMismatch(format!(
                "LU needs rows >= cols, got {m}x{n}"
            )));
        }
        if matches!(options.pivoting, Pivoting::Diagonal) && m != n {
            return Err(SparseError::NotSquare { rows: m, cols: n });
        }
        let q = options.ordering.permutation(a);
        let mut pinv = vec![NONE; m];

        let mut lp = vec![0usize];
        let mut li: Vec<usize> = Vec::new();
        let mut lx: Vec<f64> = Vec::new();
        let mut up = vec![0usize];
        let mut ui: Vec<usize> = Vec::new();
        let mut ux: Vec<f64> = Vec::new();

        let mut x = vec![0.0f64; m];
        let mut mark = vec![NONE; m];
        let mut topo: Vec<usize> = Vec::with_capacity(m);
        let mut stack: Vec<(usize, usize)> = Vec::new();

        for k in 0..n {
            let col = q[k];
            let (arows, avals) = a.col(col);

            // Nonzero pattern of L \ A(:, col), in topological order.
            topo.clear();
            for &s in arows {
                if mark[s] == k {
                    continue;
                }
                mark[s] = k;
                stack.push((s, 0));
                while let Some(top) = stack.len().checked_sub(1) {
                    let (node, child) = stack[top];
                    let j = pinv[node];
                    let (cs, ce) = if j == NONE { (0, 0) } else { (lp[j], lp[j + 1]) };
                    if cs + child < ce {
                        stack[top].1 += 1;
                        let next = li[cs + child];
                        if mark[next] != k {
                            mark[next] = k;
                            stack.push((next, 0));
                        }
                    } else {
                        topo.push(node);
                        stack.pop();
                    }
                }
            }
            topo.reverse();

            for (&i, &v) in arows.iter().zip(avals) {
                x[i] = v;
            }
            for &i in &topo {
                let j = pinv[i];
                if j == NONE {
                    continue;
                }
                let xi = x[i];
                for p in lp[j]..lp[j + 1] {
                    x[li[p]] -= lx[p] * xi;
                }
            }

            let mut best: Option<(usize, f64)> = None;
            for &i in &topo {
                if pinv[i] != NONE {
                    ui.push(pinv[i]);
                    ux.push(x[i]);
                } else {
                    let mag = x[i].abs();
                    match best {
                        Some((bi, bm)) if bm > mag || (bm == mag && bi < i) => {}
                        _ => best = Some((i, mag)),
                    }
                }
            }
            let diag_row = if m == n { Some(col) } else { None };
            let diag_ok = |i: usize| pinv[i] == NONE && mark[i] == k;
            let ipiv = match options.pivoting {
                Pivoting::Diagonal => {
                    let d = diag_row.unwrap();
                    if !diag_ok(d) || x[d] == 0.0 {
                        return Err(SparseError::SingularPivot { column: col });
                    }
                    d
                }
                Pivoting::Partial { threshold } => {
                    let (bi, bm) = match best {
                        Some(b) if b.1 > 0.0 => b,
                        _ => return Err(SparseError::SingularPivot { column: col }),
                    };
                    match diag_row {
                        Some(d) if diag_ok(d) && x[d].abs() >= threshold * bm && x[d] != 0.0 => d,
                        _ => bi,
                    }
                }
            };
            let pivot = x[ipiv];
            pinv[ipiv] = k;
            ui.push(k);
            ux.push(pivot);
            up.push(ui.len());
            for &i in &topo {
                if pinv[i] == NONE {
                    li.push(i);
                    lx.push(x[i] / pivot);
                }
                x[i] = 0.0;
            }
            lp.push(li.len());
        }

        let mut next = n;
        for p in pinv.iter_mut() {
            if *p == NONE {
                *p = next;
                next += 1;
            }
        }
        let l = sorted_csc(m, n, &lp, li.iter().map(|&i| pinv[i]).collect(), lx);
        let u = sorted_csc(n, n, &up, ui, ux);
        Ok(Self {
            nrows: m,
            ncols: n,
            col_order: q,
            row_pos: pinv,
            l,
            u,
            a_col_ptr: a.col_ptr().to_vec(),
            a_row_idx: a.row_idx().to_vec(),
            options,
            stats: FactorStats {
                symbolic_analyses: 1,
                numeric_factorizations: 1,
                refactorizations: 0,
                pattern_allocations: 1,
            },
            work: vec![0.0; m],
        })
    }

    /// Recomputes the numeric factors of a matrix with the same nonzero
    /// pattern, keeping the pivot sequence and all factor storage.
    pub fn refactor(&mut self, a: &CscMatrix<f64>) -> Result<(), SparseError> {
        if a.nrows() != self.nrows
            || a.ncols() != self.ncols
            || a.col_ptr() != self.a_col_ptr.as_slice()
            || a.row_idx() != self.a_row_idx.as_slice()
        {
            return Err(SparseError::PatternMismatch);
        }
        let x = &mut self.work;
        for k in 0..self.ncols {
            let col = self.col_order[k];
            let (arows, avals) = a.col(col);
            for (&i, &v) in arows.iter().zip(avals) {
                x[self.row_pos[i]] = v;
            }
            let (ua, ub) = (self.u.col_ptr[k], self.u.col_ptr[k + 1]);
            for p in ua..ub - 1 {
                let j = self.u.row_idx[p];
                let uj = x[j];
                self.u.values[p] = uj;
                for t in self.l.col_ptr[j]..self.l.col_ptr[j + 1] {
                    x[self.l.row_idx[t]] -= self.l.values[t] * uj;
                }
            }
            let pivot = x[k];
            let (la, lb) = (self.l.col_ptr[k], self.l.col_ptr[k + 1]);
            let below = (la..lb).fold(0.0f64, |m, t| m.max(x[self.l.row_idx[t]].abs()));
            let unstable = match self.options.pivoting {
                Pivoting::Partial { threshold } => pivot.abs() < threshold * below,
                Pivoting::Diagonal => false,
            };
            if pivot == 0.0 || !pivot.is_finite() || unstable {
                for p in ua..ub {
                    x[self.u.row_idx[p]] = 0.0;
                }
                for t in la..lb {
                    x[self.l.row_idx[t]] = 0.0;
                }
                return Err(if pivot == 0.0 {
                    SparseError::SingularPivot { column: col }
                } else {
                    SparseError::UnstablePivot { column: col, pivot }
                });
            }
            self.u.values[ub - 1] = pivot;
            x[k] = 0.0;
            for t in la..lb {
                let r = self.l.row_idx[t];
                self.l.values[t] = x[r] / pivot;
                x[r] = 0.0;
            }
            for p in ua..ub - 1 {
                x[self.u.row_idx[p]] = 0.0;
            }
        }
        self.stats.refactorizations += 1;
        Ok(())
    }

    /// Solves `A x = b` for a square factorization.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(self.nrows, self.ncols, "solve requires a square factorization");
        assert_eq!(b.len(), self.nrows);
        let n = self.ncols;
        let mut y = vec![0.0; n];
        for (i, &v) in b.iter().enumerate() {
            y[self.row_pos[i]] = v;
        }
        self.solve_lower_in_place(&mut y);
        self.solve_upper(&mut y);
        let mut x = vec![0.0; n];
        for k in 0..n {
            x[self.col_order[k]] = y[k];
        }
        x
    }

    /// Solves `Aᵀ x = b` for a square factorization.
    pub fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(self.nrows, self.ncols, "solve requires a square factorization");
        let n = self.ncols;
        let mut w: Vec<f64> = (0..n).map(|k| b[self.col_order[k]]).collect();
        for j in 0..n {
            let (rows, vals) = self.u.col(j);
            let last = rows.len() - 1;
            let mut s = w[j];
            for p in 0..last {
                s -= vals[p] * w[rows[p]];
            }
            w[j] = s / vals[last];
        }
        for j in (0..n).rev() {
            let (rows, vals) = self.l.col(j);
            let mut s = w[j];
            for (&r, &v) in rows.iter().zip(vals) {
                s -= v * w[r];
            }
            w[j] = s;
        }
        (0..n).map(|i| w[self.row_pos[i]]).collect()
    }

    fn solve_lower_in_place(&self, y: &mut [f64]) {
        for j in 0..self.ncols {
            let yj = y[j];
            if yj == 0.0 {
                continue;
            }
            let (rows, vals) = self.l.col(j);
            for (&r, &v) in rows.iter().zip(vals) {
                if r < y.len() {
                    y[r] -= v * yj;
                }
            }
        }
    }

    /// Back substitution with `U` in permuted numbering (`y` has length `ncols`).
    pub fn solve_upper(&self, y: &mut [f64]) {
        for j in (0..self.ncols).rev() {
            let (rows, vals) = self.u.col(j);
            let last = rows.len() - 1;
            y[j] /= vals[last];
            let yj = y[j];
            for p in 0..last {
                y[rows[p]] -= vals[p] * yj;
            }
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    /// Strictly lower part of `L` in permuted row numbering.
    pub fn lower(&self) -> &CscMatrix<f64> {
        &self.l
    }

    /// `U` including its diagonal.
    pub fn upper(&self) -> &CscMatrix<f64> {
        &self.u
    }

    /// `L` with its unit diagonal made explicit.
    pub fn unit_lower(&self) -> CscMatrix<f64> {
        let mut trip = Vec::with_capacity(self.l.nnz() + self.ncols);
        for j in 0..self.ncols {
            trip.push((j, j, 1.0));
            let (rows, vals) = self.l.col(j);
            for (&r, &v) in rows.iter().zip(vals) {
                trip.push((r, j, v));
            }
        }
        CscMatrix::from_triplets(self.nrows, self.ncols, &trip).expect("valid factor")
    }

    /// Column `k` of the factors is column `column_order()[k]` of `A`.
    pub fn column_order(&self) -> &[usize] {
        &self.col_order
    }

    /// Row `i` of `A` is row `row_position()[i]` of the factors.
    pub fn row_position(&self) -> &[usize] {
        &self.row_pos
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.ncols)
            .map(|j| {
                let (_, vals) = self.u.col(j);
                vals[vals.len() - 1]
            })
            .collect()
    }

    pub fn options(&self) -> LuOptions {
        self.options
    }

    pub fn stats(&self) -> FactorStats {
        self.stats
    }

    pub fn fill_nnz(&self) -> usize {
        self.l.nnz() + self.u.nnz()
    }
}

fn sorted_csc(nrows: usize, ncols: usize, ptr: &[usize], idx: Vec<usize>, val: Vec<f64>) -> CscMatrix<f64> {
    let mut row_idx = idx;
    let mut values = val;
    let mut perm: Vec<usize> = Vec::new();
    for j in 0..ncols {
        let (a, b) = (ptr[j], ptr[j + 1]);
        perm.clear();
        perm.extend(a..b);
        perm.sort_unstable_by_key(|&p| row_idx[p]);
        let r: Vec<usize> = perm.iter().map(|&p| row_idx[p]).collect();
        let v: Vec<f64> = perm.iter().map(|&p| values[p]).collect();
        row_idx[a..b].copy_from_slice(&r);
        values[a..b].copy_from_slice(&v);
    }
    CscMatrix::from_parts_unchecked(nrows, ncols, ptr.to_vec(), row_idx, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::Ordering;

    fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
        // Gaussian elimination with partial pivoting, independent of the sparse path.
        let n = b.len();
        let mut m: Vec<Vec<f64>> = a.iter().cloned().collect();
        let mut rhs = b.to_vec();
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| m[i][k].abs().total_cmp(&m[j][k].abs())).unwrap();
            m.swap(k, p);
            rhs.swap(k, p);
            for i in k + 1..n {
                let f = m[i][k] / m[k][k];
                for j in k..n {
                    m[i][j] -= f * m[k][j];
                }
                rhs[i] -= f * rhs[k];
            }
        }
        let mut x = vec![0.0; n];
        for k in (0..n).rev() {
            let s: f64 = (k + 1..n).map(|j| m[k][j] * x[j]).sum();
            x[k] = (rhs[k] - s) / m[k][k];
        }
        x
    }

    fn example() -> Vec<Vec<f64>> {
        vec![
            vec![4.0, 0.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 2.0, 0.0, 1.0],
            vec![1.0, 3.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 5.0, 2.0],
            vec![0.0, 1.0, 0.0, 1.0, 3.0],
        ]
    }

    #[test]
    fn identity_has_no_fill() {
        let a = CscMatrix::<f64>::identity(4);
        let f = LuFactorization::factor(&a).unwrap();
        assert_eq!(f.lower().nnz(), 0);
        assert_eq!(f.upper().nnz(), 4);
        assert_eq!(f.solve(&[1.0, 2.0, 3.0, 4.0]), vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn five_by_five_matches_dense_elimination() {
        let d = example();
        let a = CscMatrix::from_dense(&d);
        let b = [1.0, -2.0, 0.5, 3.0, 4.0];
        let expect = dense_solve(&d, &b);
        for ordering in [Ordering::Natural, Ordering::MinimumDegree] {
            let f = LuFactorization::factor_with(&a, LuOptions::default().with_ordering(ordering)).unwrap();
            let x = f.solve(&b);
            for (u, v) in x.iter().zip(&expect) {
                assert!((u - v).abs() < 1e-10, "{x:?} vs {expect:?}");
            }
            let xt = f.solve_transpose(&b);
            let at = a.transpose().to_dense();
            let et = dense_solve(&at, &b);
            for (u, v) in xt.iter().zip(&et) {
                assert!((u - v).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn refactor_matches_cold_factorization() {
        let a = CscMatrix::from_dense(&example());
        let mut f = LuFactorization::factor(&a).unwrap();
        let mut a2 = a.clone();
        for (p, v) in a2.values_mut().iter_mut().enumerate() {
            *v *= 1.0 + 0.1 * p as f64;
        }
        f.refactor(&a2).unwrap();
        let cold = LuFactorization::factor(&a2).unwrap();
        let b = [1.0, 2.0, 3.0, 4.0, 5.0];
        for (u, v) in f.solve(&b).iter().zip(cold.solve(&b)) {
            assert!((u - v).abs() < 1e-12);
        }
        let s = f.stats();
        assert_eq!(s.refactorizations, 1);
        assert_eq!(s.pattern_allocations, 1);
    }

    #[test]
    fn refactor_rejects_pattern_change() {
        let a = CscMatrix::from_dense(&example());
        let mut f = LuFactorization::factor(&a).unwrap();
        let mut d = example();
        d[0][4] = 1.0;
        assert_eq!(f.refactor(&CscMatrix::from_dense(&d)), Err(SparseError::PatternMismatch));
    }

    #[test]
    fn singular_matrix_reports_column() {
        let a = CscMatrix::from_dense(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        let e = LuFactorization::factor_with(&a, LuOptions::default().with_ordering(Ordering::Natural))
            .unwrap_err();
        assert_eq!(e, SparseError::SingularPivot { column: 1 });
    }

    #[test]
    fn rectangular_factor_reproduces_matrix() {
        let d = vec![
            vec![1.0, 0.0, 2.0],
            vec![0.0, 3.0, 0.0],
            vec![4.0, 0.0, 0.0],
            vec![0.0, 1.0, 1.0],
            vec![2.0, 2.0, 0.0],
        ];
        let a = CscMatrix::from_dense(&d);
        let f = LuFactorization::factor(&a).unwrap();
        let l = f.unit_lower().to_dense();
        let u = f.upper().to_dense();
        for i in 0..5 {
            for k in 0..3 {
                let lu: f64 = (0..3).map(|t| l[f.row_position()[i]][t] * u[t][k]).sum();
                assert!((lu - d[i][f.column_order()[k]]).abs() < 1e-12);
            }
        }
    }
}
