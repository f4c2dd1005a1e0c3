//! Continuous-time LQR synthesis.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

use super::lyapunov::solve_lyapunov;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthesisError {
    #[error("invalid weights: {0}")]
    Weights(String),
    #[error("dimension mismatch: {0}")]
    Dimensions(String),
    #[error("(A, B) is not stabilizable: mode {re:+.6} {im:+.6}i is uncontrollable")]
    Unstabilizable { re: f64, im: f64 },
    #[error("(A, Q) is not detectable: mode {re:+.6} {im:+.6}i is unobservable")]
    Undetectable { re: f64, im: f64 },
    #[error("no stabilizing initial gain")]
    NoInitialGain,
    #[error("Lyapunov solve failed at Newton step {0}")]
    Lyapunov(usize),
    #[error("Riccati residual {residual:e} above bound {bound:e} after {iterations} iterations")]
    NoConvergence {
        residual: f64,
        bound: f64,
        iterations: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LqrWeights {
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

impl LqrWeights {
    pub fn diagonal(q: &[f64], r: &[f64]) -> Self {
        Self {
            q: DMatrix::from_diagonal(&DVector::from_column_slice(q)),
            r: DMatrix::from_diagonal(&DVector::from_column_slice(r)),
        }
    }

    pub fn validate(&self) -> Result<(), SynthesisError> {
        let sym = |m: &DMatrix<f64>| (m - m.transpose()).amax() <= 1e-12 * m.amax().max(1.0);
        if !self.q.is_square() || !self.r.is_square() {
            return Err(SynthesisError::Weights("Q and R must be square".into()));
        }
        if !sym(&self.q) || !sym(&self.r) {
            return Err(SynthesisError::Weights("Q and R must be symmetric".into()));
        }
        if self.r.clone().symmetric_eigenvalues().min() <= 0.0 {
            return Err(SynthesisError::Weights("R must be positive definite".into()));
        }
        if self.q.clone().symmetric_eigenvalues().min() < -1e-12 * self.q.amax().max(1.0) {
            return Err(SynthesisError::Weights("Q must be positive semidefinite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LqrGain {
    pub k: DMatrix<f64>,
    pub p: DMatrix<f64>,
    /// Frobenius norm of the Riccati residual at `p`.
    pub residual: f64,
    pub iterations: usize,
}

/// `-P A - A^T P - Q + P B R^-1 B^T P`.
pub fn riccati_residual(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    w: &LqrWeights,
    p: &DMatrix<f64>,
) -> DMatrix<f64> {
    let r_inv = w.r.clone().try_inverse().expect("R is positive definite");
    -(p * a) - a.transpose() * p - &w.q + p * b * r_inv * b.transpose() * p
}

/// Largest real part among the eigenvalues of `m`.
pub fn spectral_abscissa(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .complex_eigenvalues()
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

fn to_complex(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|v| Complex64::new(v, 0.0))
}

/// PBH test: every eigenvalue of `a` with non-negative real part must keep
/// `[A - lambda I, B]` at full row rank. Returns the first offending mode.
pub fn uncontrollable_mode(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Option<Complex64> {
    let n = a.nrows();
    let scale = a.norm() + b.norm();
    let ac = to_complex(a);
    let bc = to_complex(b);
    for lambda in a.clone().complex_eigenvalues().iter() {
        if lambda.re < -1e-9 * scale.max(1.0) {
            continue;
        }
        let mut m = DMatrix::<Complex64>::zeros(n, n + b.ncols());
        m.view_mut((0, 0), (n, n))
            .copy_from(&(&ac - DMatrix::<Complex64>::identity(n, n) * *lambda));
        m.view_mut((0, n), (n, b.ncols())).copy_from(&bc);
        let sv = m.singular_values();
        if sv.min() <= 1e-10 * scale.max(1.0) {
            return Some(*lambda);
        }
    }
    None
}

/// Dual PBH test for detectability of `(A, Q)`.
pub fn unobservable_mode(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Option<Complex64> {
    uncontrollable_mode(&a.transpose(), q)
}

/// Eigenvalue-shift stabilization: with `beta` above every eigenvalue's real
/// part, `(A + beta I) Z + Z (A + beta I)^T = 2 B B^T` gives `K = B^T Z^-1`
/// with `A - B K` Hurwitz.
pub fn bass_gain(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let beta = a.norm() + 1.0;
    let shifted = -(a + DMatrix::<f64>::identity(n, n) * beta).transpose();
    let z = solve_lyapunov(&shifted, &(b * b.transpose() * 2.0))?;
    let z_inv = match z.clone().try_inverse() {
        Some(zi) if zi.iter().all(|v| v.is_finite()) => zi,
        _ => {
            let eps = 1e-12 * z.norm();
            z.pseudo_inverse(eps).ok()?
        }
    };
    Some(b.transpose() * z_inv)
}

/// Stabilizing solution of `-P A - A^T P - Q + P B R^-1 B^T P = 0` and the
/// gain `K = R^-1 B^T P`, by Newton-Kleinman iteration.
///
/// The iteration starts from `K = 0` when `A` is already Hurwitz and from
/// [`bass_gain`] otherwise. Each step solves
/// `(A - B K)^T P + P (A - B K) = -(Q + K^T R K)`.
pub fn solve_riccati(a: &DMatrix<f64>, b: &DMatrix<f64>, w: &LqrWeights) -> Result<LqrGain, SynthesisError> {
    const MAX_ITER: usize = 100;
    let n = a.nrows();
    if !a.is_square() || b.nrows() != n || w.q.nrows() != n || w.r.nrows() != b.ncols() {
        return Err(SynthesisError::Dimensions(format!(
            "A {}x{}, B {}x{}, Q {}x{}, R {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols(),
            w.q.nrows(),
            w.q.ncols(),
            w.r.nrows(),
            w.r.ncols()
        )));
    }
    w.validate()?;
    if let Some(l) = uncontrollable_mode(a, b) {
        return Err(SynthesisError::Unstabilizable { re: l.re, im: l.im });
    }
    if let Some(l) = unobservable_mode(a, &w.q) {
        return Err(SynthesisError::Undetectable { re: l.re, im: l.im });
    }
    let r_inv = w.r.clone().try_inverse().ok_or_else(|| SynthesisError::Weights("R is singular".into()))?;

    let mut k = if spectral_abscissa(a) < 0.0 {
        DMatrix::zeros(b.ncols(), n)
    } else {
        bass_gain(a, b).ok_or(SynthesisError::NoInitialGain)?
    };
    if spectral_abscissa(&(a - b * &k)) >= 0.0 {
        return Err(SynthesisError::NoInitialGain);
    }

    let mut best: Option<(f64, DMatrix<f64>)> = None;
    let mut iterations = 0;
    for it in 1..=MAX_ITER {
        iterations = it;
        let ak = a - b * &k;
        let rhs = &w.q + k.transpose() * &w.r * &k;
        let p = solve_lyapunov(&ak, &rhs).ok_or(SynthesisError::Lyapunov(it))?;
        let res = riccati_residual(a, b, w, &p).norm();
        let improved = best.as_ref().map_or(true, |(r, _)| res < *r);
        k = &r_inv * b.transpose() * &p;
        if improved {
            best = Some((res, p));
        } else if best.as_ref().is_some_and(|(r, bp)| *r <= 1e-12 * (1.0 + bp.norm())) {
            break;
        }
        if res <= 1e-14 * (1.0 + best.as_ref().unwrap().1.norm()) {
            break;
        }
    }

    let (mut residual, mut p) = best.expect("at least one iteration");
    // Defect correction: the same Newton step solved for the small update
    // rather than for P itself, which loses less to cancellation when P is
    // large.
    for _ in 0..5 {
        let ak = a - b * (&r_inv * b.transpose() * &p);
        let Some(delta) = solve_lyapunov(&ak, &-riccati_residual(a, b, w, &p)) else {
            break;
        };
        let trial = &p + (&delta + delta.transpose()) * 0.5;
        let res = riccati_residual(a, b, w, &trial).norm();
        if !(res < residual) {
            break;
        }
        iterations += 1;
        residual = res;
        p = trial;
    }
    let bound = 1e-9 * (1.0 + p.norm());
    if residual > bound {
        return Err(SynthesisError::NoConvergence {
            residual,
            bound,
            iterations,
        });
    }
    let k = &r_inv * b.transpose() * &p;
    Ok(LqrGain {
        k,
        p,
        residual,
        iterations,
    })
}
