//! Bracketed scalar root finding.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RootError {
    #[error("no sign change on [{lo}, {hi}]: f(lo) = {f_lo}, f(hi) = {f_hi}")]
    NotBracketed { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },
    #[error("function is not finite at x = {0}")]
    NonFinite(f64),
    #[error("no convergence after {0} iterations")]
    NoConvergence(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Finds a root of `f` on `[lo, hi]` by bisection, switching to safeguarded
/// secant steps once the bracket is narrow. Stops when `|f(x)| <= ftol` and
/// the bracket is narrower than `xtol`, or when either holds exactly.
///
/// The secant iterate is only accepted if it stays strictly inside the
/// current bracket; otherwise the step falls back to bisection, so the
/// bracket always shrinks.
pub fn bisect_secant<F>(mut f: F, lo: f64, hi: f64, xtol: f64, ftol: f64) -> Result<Root, RootError>
where
    F: FnMut(f64) -> f64,
{
    const MAX_ITER: usize = 200;
    const SECANT_SWITCH: f64 = 1e-4;

    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let mut fa = f(a);
    let mut fb = f(b);
    if !fa.is_finite() {
        return Err(RootError::NonFinite(a));
    }
    if !fb.is_finite() {
        return Err(RootError::NonFinite(b));
    }
    if fa == 0.0 {
        return Ok(Root { x: a, residual: 0.0, iterations: 0 });
    }
    if fb == 0.0 {
        return Ok(Root { x: b, residual: 0.0, iterations: 0 });
    }
    if fa.signum() == fb.signum() {
        return Err(RootError::NotBracketed { lo: a, hi: b, f_lo: fa, f_hi: fb });
    }

    for it in 1..=MAX_ITER {
        let mid = 0.5 * (a + b);
        let x = if b - a < SECANT_SWITCH {
            let s = b - fb * (b - a) / (fb - fa);
            if s > a && s < b {
                s
            } else {
                mid
            }
        } else {
            mid
        };
        let fx = f(x);
        if !fx.is_finite() {
            return Err(RootError::NonFinite(x));
        }
        if fx == 0.0 {
            return Ok(Root { x, residual: 0.0, iterations: it });
        }
        if fx.signum() == fa.signum() {
            a = x;
            fa = fx;
        } else {
            b = x;
            fb = fx;
        }
        // A secant step that lands next to one end barely shrinks the
        // bracket; follow it with a bisection of what remains.
        if b - a >= SECANT_SWITCH || fx.abs() > ftol {
            let m = 0.5 * (a + b);
            let fm = f(m);
            if !fm.is_finite() {
                return Err(RootError::NonFinite(m));
            }
            if fm == 0.0 {
                return Ok(Root { x: m, residual: 0.0, iterations: it });
            }
            if fm.signum() == fa.signum() {
                a = m;
                fa = fm;
            } else {
                b = m;
                fb = fm;
            }
        }
        let (best, fbest) = if fa.abs() < fb.abs() { (a, fa) } else { (b, fb) };
        if fbest.abs() <= ftol && (b - a) <= xtol {
            return Ok(Root { x: best, residual: fbest.abs(), iterations: it });
        }
        if b - a <= f64::EPSILON * best.abs().max(1.0) {
            return Ok(Root { x: best, residual: fbest.abs(), iterations: it });
        }
    }
    Err(RootError::NoConvergence(MAX_ITER))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_sqrt2() {
        let r = bisect_secant(|x| x * x - 2.0, 0.0, 2.0, 1e-14, 1e-14).unwrap();
        assert!((r.x - 2f64.sqrt()).abs() < 1e-14);
        assert!(r.iterations < 60);
    }

    #[test]
    fn endpoint_root() {
        let r = bisect_secant(|x| x, 0.0, 1.0, 1e-12, 1e-12).unwrap();
        assert_eq!(r.x, 0.0);
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn rejects_unbracketed() {
        let err = bisect_secant(|x| x * x + 1.0, -1.0, 1.0, 1e-12, 1e-12).unwrap_err();
        assert!(matches!(err, RootError::NotBracketed { .. }));
    }

    #[test]
    fn decreasing_function() {
        let r = bisect_secant(|x: f64| x.cos() - x, 0.0, 1.5, 1e-13, 1e-13).unwrap();
        assert!((r.x.cos() - r.x).abs() <= 1e-13);
    }
}
