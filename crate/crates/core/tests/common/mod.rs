//! Dense reference solvers shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};

/// Largest eigenvalue and eigenvector of `K x = λ M x` by dense Cholesky reduction.
pub fn dense_top(k: &DMatrix<f64>, m: &DMatrix<f64>) -> (f64, Vec<f64>) {
    let chol = m.clone().cholesky().expect("M must be SPD");
    let l = chol.l();
    let linv = l.clone().try_inverse().unwrap();
    let c = &linv * k * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);
    let (i, &val) = eig.eigenvalues.iter().enumerate().max_by(|a, b| a.1.partial_cmp(b.1).unwrap()).unwrap();
    let y = eig.eigenvectors.column(i).into_owned();
    let x = linv.transpose() * y;
    (val, x.iter().copied().collect())
}

/// `Σ w_c (φ_{c+1} − φ_c)²/dy` on interior unknowns `φ_1..φ_{n−1}` (Dirichlet walls).
pub fn stiffness(wc: &[f64], dy: f64) -> DMatrix<f64> {
    let n = wc.len();
    let mut a = DMatrix::zeros(n - 1, n - 1);
    for c in 0..n {
        let idx = |node: usize| if (1..n).contains(&node) { Some(node - 1) } else { None };
        let st = [(c, -1.0), (c + 1, 1.0)];
        for &(p, cp) in &st {
            for &(q, cq) in &st {
                if let (Some(i), Some(j)) = (idx(p), idx(q)) {
                    a[(i, j)] += wc[c] * cp * cq / dy;
                }
            }
        }
    }
    a
}

pub fn mass(wn: &[f64], dy: f64) -> DMatrix<f64> {
    DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(wn.len(), wn.iter().map(|w| w * dy)))
}

/// `Σ_j (φ_{j+1} − 2φ_j + φ_{j−1})²/dy³` over interior nodes with odd reflection of
/// `φ` across the walls (so the wall curvature vanishes).
pub fn curvature(n: usize, dy: f64) -> DMatrix<f64> {
    let m = n - 1;
    let mut a = DMatrix::zeros(m, m);
    for j in 1..n {
        let st = [(j as isize - 1, 1.0), (j as isize, -2.0), (j as isize + 1, 1.0)];
        for &(p, cp) in &st {
            for &(q, cq) in &st {
                if p >= 1 && p <= m as isize && q >= 1 && q <= m as isize {
                    a[(p as usize - 1, q as usize - 1)] += cp * cq / dy.powi(3);
                }
            }
        }
    }
    a
}
