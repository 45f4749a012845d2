//! Small dense row reduction used on reduced (island-level) matrices.

const PIVOT_TOL: f64 = 1e-9;

/// Reduced row echelon form in place; returns the pivot columns.
fn rref(a: &mut [Vec<f64>], ncols: usize) -> Vec<usize> {
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..ncols {
        if r == a.len() {
            break;
        }
        let (best, val) = (r..a.len())
            .map(|i| (i, a[i][c].abs()))
            .fold((r, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        let scale = a.iter().map(|row| row[c].abs()).fold(1.0, f64::max);
        if val <= PIVOT_TOL * scale {
            continue;
        }
        a.swap(r, best);
        let p = a[r][c];
        for v in a[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = a[r].clone();
        for (i, row) in a.iter_mut().enumerate() {
            if i != r && row[c] != 0.0 {
                let f = row[c];
                for (x, y) in row.iter_mut().zip(&pivot_row) {
                    *x -= f * y;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

/// Numerical rank of a dense matrix given by rows.
pub fn rank(rows: &[Vec<f64>], ncols: usize) -> usize {
    let mut a = rows.to_vec();
    rref(&mut a, ncols).len()
}

/// Basis of the null space, one vector of length `ncols` per free column.
pub fn null_space(rows: &[Vec<f64>], ncols: usize) -> Vec<Vec<f64>> {
    let mut a = rows.to_vec();
    let pivots = rref(&mut a, ncols);
    let mut is_pivot = vec![None; ncols];
    for (r, &c) in pivots.iter().enumerate() {
        is_pivot[c] = Some(r);
    }
    (0..ncols)
        .filter(|&f| is_pivot[f].is_none())
        .map(|f| {
            let mut v = vec![0.0; ncols];
            v[f] = 1.0;
            for (c, r) in is_pivot.iter().enumerate() {
                if let Some(r) = *r {
                    v[c] = -a[r][f];
                }
            }
            v
        })
        .collect()
}
