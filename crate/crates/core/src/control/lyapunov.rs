//! Continuous Lyapunov equation `A^T X + X A + Q = 0` by reduction to real
//! Schur form.

use nalgebra::{DMatrix, DVector};

/// Solves `A^T X + X A = -Q`. `A` must have no pair of eigenvalues summing
/// to zero, which holds whenever `A` is Hurwitz.
///
/// With `A = U T U^T` the equation becomes `T^T Y + Y T = -U^T Q U` for
/// `Y = U^T X U`. `T` is quasi upper triangular, so `Y` is found one
/// diagonal-block pair at a time in row-major block order; each pair is a
/// Sylvester equation of size at most 2x2 solved directly.
pub fn solve_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let (u, t) = a.clone().schur().unpack();
    let c = -(u.transpose() * q * &u);

    let scale = t.norm().max(1.0);
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)].abs() > 1e-14 * scale {
            blocks.push((i, 2));
            i += 2;
        } else {
            blocks.push((i, 1));
            i += 1;
        }
    }

    let mut y = DMatrix::<f64>::zeros(n, n);
    for &(ri, pi) in &blocks {
        for &(cj, qj) in &blocks {
            let mut rhs = c.view((ri, cj), (pi, qj)).into_owned();
            for &(rk, pk) in blocks.iter().take_while(|b| b.0 < ri) {
                rhs -= t.view((rk, ri), (pk, pi)).transpose() * y.view((rk, cj), (pk, qj));
            }
            for &(cl, ql) in blocks.iter().take_while(|b| b.0 < cj) {
                rhs -= y.view((ri, cl), (pi, ql)) * t.view((cl, cj), (ql, qj));
            }
            let tii = t.view((ri, ri), (pi, pi)).into_owned();
            let tjj = t.view((cj, cj), (qj, qj)).into_owned();
            let block = small_sylvester(&tii.transpose(), &tjj, &rhs)?;
            y.view_mut((ri, cj), (pi, qj)).copy_from(&block);
        }
    }
    let x = &u * y * u.transpose();
    Some((&x + x.transpose()) * 0.5)
}

/// `A X + X B = C` through the Kronecker form
/// `(I kron A + B^T kron I) vec X = vec C`.
fn small_sylvester(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let (p, q) = (a.nrows(), b.nrows());
    let ip = DMatrix::<f64>::identity(p, p);
    let iq = DMatrix::<f64>::identity(q, q);
    let k = iq.kronecker(a) + b.transpose().kronecker(&ip);
    let v = DVector::from_column_slice(c.as_slice());
    let sol = k.lu().solve(&v)?;
    Some(DMatrix::from_column_slice(p, q, sol.as_slice()))
}
