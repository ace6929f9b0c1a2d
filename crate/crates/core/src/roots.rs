//! Bracketed scalar root finding (Brent–Dekker).

use crate::{Error, Result};

/// Stopping rule for [`brent`].
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    /// Stop once `|f(x)|` is below this.
    pub residual: f64,
    /// Stop once the bracket is narrower than `width * max(1, |x|)`.
    pub width: f64,
    pub max_iter: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { residual: 1e-12, width: 1e-14, max_iter: 200 }
    }
}

/// Finds a root of `f` in `[a, b]`, where `f(a)` and `f(b)` must have
/// opposite signs (or one of them be zero).
///
/// Inverse quadratic interpolation and secant steps are used when they stay
/// inside the bracket and shrink it fast enough, bisection otherwise, so the
/// bracket always contains a sign change.
pub fn brent<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: Tolerance) -> Result<f64> {
    let (mut a, mut b) = (a, b);
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Bracket(0));
    }
    if fa.abs() < fb.abs() {
        core::mem::swap(&mut a, &mut b);
        core::mem::swap(&mut fa, &mut fb);
    }
    // c is the previous iterate, d the one before it.
    let mut c = a;
    let mut fc = fa;
    let mut d = c;
    let mut bisected = true;

    for _ in 0..tol.max_iter {
        if fb.abs() < tol.residual || (b - a).abs() < tol.width * b.abs().max(1.0) {
            return Ok(b);
        }

        let mut s = if fa != fc && fb != fc {
            a * fb * fc / ((fa - fb) * (fa - fc))
                + b * fa * fc / ((fb - fa) * (fb - fc))
                + c * fa * fb / ((fc - fa) * (fc - fb))
        } else {
            b - fb * (b - a) / (fb - fa)
        };

        let lo = (3.0 * a + b) / 4.0;
        let outside = !((s > lo.min(b)) && (s < lo.max(b)));
        let slow = if bisected { (s - b).abs() >= (b - c).abs() / 2.0 } else { (s - b).abs() >= (c - d).abs() / 2.0 };
        let tiny = if bisected { (b - c).abs() < tol.width } else { (c - d).abs() < tol.width };
        bisected = outside || slow || tiny;
        if bisected {
            s = (a + b) / 2.0;
        }

        let fs = f(s);
        d = c;
        c = b;
        fc = fb;
        if fa.signum() != fs.signum() {
            b = s;
            fb = fs;
        } else {
            a = s;
            fa = fs;
        }
        if fa.abs() < fb.abs() {
            core::mem::swap(&mut a, &mut b);
            core::mem::swap(&mut fa, &mut fb);
        }
    }
    Err(Error::NonConvergence(tol.max_iter))
}
