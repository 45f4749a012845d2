use super::{CscMatrix, Ordering, SparseError};

#[derive(Debug, Clone)]
struct Reflector {
    beta: f64,
    idx: Vec<usize>,
    val: Vec<f64>,
}

impl Reflector {
    fn apply(&self, w: &mut [f64]) {
        if self.beta == 0.0 {
            return;
        }
        let s: f64 = self.idx.iter().zip(&self.val).map(|(&i, &v)| v * w[i]).sum();
        if s != 0.0 {
            let f = self.beta * s;
            for (&i, &v) in self.idx.iter().zip(&self.val) {
                w[i] -= f * v;
            }
        }
    }
}

/// Householder QR, `A Π = Q R`, with `Q` held as a sequence of reflectors.
///
/// Each column is densified in a workspace while previous reflectors are
/// applied to it; only nonzeros of the resulting reflector and `R` column
/// are kept.
#[derive(Debug, Clone)]
pub struct QrFactorization {
    nrows: usize,
    ncols: usize,
    col_order: Vec<usize>,
    reflectors: Vec<Reflector>,
    r: CscMatrix<f64>,
}

impl QrFactorization {
    pub fn factor(a: &CscMatrix<f64>) -> Result<Self, SparseError> {
        Self::factor_with(a, Ordering::Natural)
    }

    pub fn factor_with(a: &CscMatrix<f64>, ordering: Ordering) -> Result<Self, SparseError> {
        let (m, n) = (a.nrows(), a.ncols());
        if m < n {
            return Err(SparseError::DimensionMismatch(format!(
                "QR needs rows >= cols, got {m}x{n}"
            )));
        }
        let q = ordering.permutation(a);
        let mut w = vec![0.0f64; m];
        let mut reflectors: Vec<Reflector> = Vec::with_capacity(n);
        let mut rp = vec![0usize];
        let mut ri = Vec::new();
        let mut rx = Vec::new();
        for j in 0..n {
            let (rows, vals) = a.col(q[j]);
            for (&i, &v) in rows.iter().zip(vals) {
                w[i] = v;
            }
            for h in &reflectors {
                h.apply(&mut w);
            }
            for (i, wi) in w.iter().enumerate().take(j) {
                if *wi != 0.0 {
                    ri.push(i);
                    rx.push(*wi);
                }
            }
            let sigma = w[j..].iter().map(|v| v * v).sum::<f64>().sqrt();
            let refl = if sigma == 0.0 {
                ri.push(j);
                rx.push(0.0);
                Reflector {
                    beta: 0.0,
                    idx: Vec::new(),
                    val: Vec::new(),
                }
            } else {
                let wj = w[j];
                let alpha = if wj >= 0.0 { -sigma } else { sigma };
                let beta = 1.0 / (sigma * (sigma + wj.abs()));
                ri.push(j);
                rx.push(alpha);
                let mut idx = vec![j];
                let mut val = vec![wj - alpha];
                for (i, &wi) in w.iter().enumerate().skip(j + 1) {
                    if wi != 0.0 {
                        idx.push(i);
                        val.push(wi);
                    }
                }
                Reflector { beta, idx, val }
            };
            reflectors.push(refl);
            rp.push(ri.len());
            w.iter_mut().for_each(|v| *v = 0.0);
        }
        Ok(Self {
            nrows: m,
            ncols: n,
            col_order: q,
            reflectors,
            r: CscMatrix::from_parts_unchecked(n, n, rp, ri, rx),
        })
    }

    /// Overwrites `b` with `Qᵀ b`.
    pub fn apply_qt(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.nrows);
        for h in &self.reflectors {
            h.apply(b);
        }
    }

    /// Overwrites `y` with `Q y`.
    pub fn apply_q(&self, y: &mut [f64]) {
        assert_eq!(y.len(), self.nrows);
        for h in self.reflectors.iter().rev() {
            h.apply(y);
        }
    }

    pub fn r(&self) -> &CscMatrix<f64> {
        &self.r
    }

    pub fn r_diagonal(&self) -> Vec<f64> {
        (0..self.ncols)
            .map(|j| {
                let (rows, vals) = self.r.col(j);
                debug_assert_eq!(*rows.last().unwrap(), j);
                vals[vals.len() - 1]
            })
            .collect()
    }

    pub fn column_order(&self) -> &[usize] {
        &self.col_order
    }

    /// First column whose `|R_jj|` falls below `rel_tol` times the largest.
    pub fn rank_deficiency(&self, rel_tol: f64) -> Option<(usize, f64)> {
        let d = self.r_diagonal();
        let max = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        d.iter()
            .enumerate()
            .find(|(_, v)| v.abs() <= rel_tol * max || max == 0.0)
            .map(|(j, v)| (self.col_order[j], v.abs()))
    }

    /// Least-squares solution of `min ‖A x − b‖₂`.
    pub fn solve_least_squares(&self, b: &[f64]) -> Result<Vec<f64>, SparseError> {
        if let Some((column, pivot)) = self.rank_deficiency(1e-13) {
            return Err(SparseError::RankDeficient { column, pivot });
        }
        let mut y = b.to_vec();
        self.apply_qt(&mut y);
        let n = self.ncols;
        for j in (0..n).rev() {
            let (rows, vals) = self.r.col(j);
            let last = rows.len() - 1;
            y[j] /= vals[last];
            let yj = y[j];
            for p in 0..last {
                y[rows[p]] -= vals[p] * yj;
            }
        }
        let mut x = vec![0.0; n];
        for j in 0..n {
            x[self.col_order[j]] = y[j];
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_equal_rows_give_the_mean() {
        let a = CscMatrix::from_dense(&[vec![1.0], vec![1.0]]);
        let f = QrFactorization::factor(&a).unwrap();
        let x = f.solve_least_squares(&[0.0, 10.0]).unwrap();
        assert!((x[0] - 5.0).abs() < 1e-14);
    }

    #[test]
    fn orthogonal_columns_give_norm_diagonal() {
        let a = CscMatrix::from_dense(&[vec![3.0, 0.0], vec![0.0, 2.0], vec![4.0, 0.0]]);
        let f = QrFactorization::factor(&a).unwrap();
        let d = f.r_diagonal();
        assert!((d[0].abs() - 5.0).abs() < 1e-14);
        assert!((d[1].abs() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn q_is_orthogonal_and_reproduces_a() {
        let dense = vec![
            vec![1.0, 2.0, 0.0],
            vec![0.0, 1.0, 1.0],
            vec![3.0, 0.0, 1.0],
            vec![0.0, 0.0, 2.0],
        ];
        let a = CscMatrix::from_dense(&dense);
        let f = QrFactorization::factor(&a).unwrap();
        let m = 4;
        let mut q = vec![vec![0.0; m]; m];
        for c in 0..m {
            let mut e = vec![0.0; m];
            e[c] = 1.0;
            f.apply_q(&mut e);
            for r in 0..m {
                q[r][c] = e[r];
            }
        }
        for i in 0..m {
            for j in 0..m {
                let s: f64 = (0..m).map(|k| q[k][i] * q[k][j]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((s - want).abs() < 1e-12);
            }
        }
        let r = f.r().to_dense();
        for i in 0..m {
            for j in 0..3 {
                let s: f64 = (0..3).map(|k| q[i][k] * r[k][j]).sum();
                assert!((s - dense[i][f.column_order()[j]]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rank_deficient_column_is_reported() {
        let a = CscMatrix::from_dense(&[vec![1.0, 2.0], vec![1.0, 2.0], vec![1.0, 2.0]]);
        let f = QrFactorization::factor(&a).unwrap();
        match f.solve_least_squares(&[1.0, 1.0, 1.0]) {
            Err(SparseError::RankDeficient { column, .. }) => assert_eq!(column, 1),
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }
}
