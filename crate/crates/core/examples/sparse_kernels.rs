//! The sparse kernels on their own: LU with refactorization, QR least
//! squares and selected inverse entries.

use gridstate::sparse::{diag_quadform, CscMatrix, LuFactorization, LuOptions, QrFactorization, SelectedInverse, SparseVec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Tridiagonal 1-D Laplacian plus identity.
    let n = 8;
    let mut t = Vec::new();
    for i in 0..n {
        t.push((i, i, 3.0));
        if i + 1 < n {
            t.push((i, i + 1, -1.0));
            t.push((i + 1, i, -1.0));
        }
    }
    let a = CscMatrix::from_triplets(n, n, &t)?;
    let mut lu = LuFactorization::factor_with(&a, LuOptions::symmetric())?;
    let x = lu.solve(&vec![1.0; n]);
    println!("LU solution {x:.4?}");

    lu.refactor(&a.map(|v| 2.0 * v))?;
    println!("after refactor: {:?}", lu.stats());

    let tall = CscMatrix::from_triplets(3, 2, &[(0, 0, 1.0), (1, 1, 1.0), (2, 0, 1.0), (2, 1, 1.0)])?;
    let ls = QrFactorization::factor(&tall)?.solve_least_squares(&[1.0, 2.0, 4.0])?;
    println!("least squares {ls:.4?}");

    let lu = LuFactorization::factor_with(&a, LuOptions::symmetric())?;
    let z = SelectedInverse::compute(&lu)?;
    let mut e0 = SparseVec::new();
    e0.push(0, 1.0);
    let mut d = SparseVec::new();
    d.push(0, 1.0);
    d.push(1, -1.0);
    let q = diag_quadform(&lu, &z, &[e0, d]);
    println!("inverse entry (0,0) {:.6}, (e0-e1)' inv (e0-e1) {:.6}", q.values[0], q.values[1]);
    Ok(())
}
