//! Scalar bracketing and root refinement shared by the analytic and
//! event-location code paths.

use crate::error::{Error, Result};

/// Sign-change brackets of `f` on a uniform scan of `[lo, hi]`.
///
/// An exact zero at a grid point is reported as a degenerate bracket.
pub(crate) fn scan_brackets<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    step: f64,
) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let n = ((hi - lo) / step).ceil() as usize;
    let mut prev_t = lo;
    let mut prev_v = f(lo);
    for i in 1..=n {
        let t = (lo + i as f64 * step).min(hi);
        let v = f(t);
        if prev_v == 0.0 {
            out.push((prev_t, prev_t));
        } else if v != 0.0 && prev_v.signum() != v.signum() {
            out.push((prev_t, t));
        }
        prev_t = t;
        prev_v = v;
        if t >= hi {
            break;
        }
    }
    if prev_v == 0.0 {
        out.push((prev_t, prev_t));
    }
    out
}

/// Brent's method on a bracketing interval. `xtol` is the absolute tolerance
/// on the abscissa; convergence also stops at machine resolution around the
/// iterate.
pub(crate) fn brent<F: FnMut(f64) -> f64>(mut f: F, a0: f64, b0: f64, xtol: f64) -> Result<f64> {
    if a0 == b0 {
        return Ok(a0);
    }
    let (mut a, mut b) = (a0, b0);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::BracketFailure(format!(
            "no sign change on [{a0}, {b0}]: f = ({fa:e}, {fb:e})"
        )));
    }
    let (mut c, mut fc) = (a, fa);
    let (mut d, mut e) = (b - a, b - a);
    for _ in 0..200 {
        if fb.abs() > fc.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            // Inverse quadratic interpolation, falling back to secant.
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            if 2.0 * p < (3.0 * xm * q - (tol1 * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
        if (fb > 0.0) == (fc > 0.0) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
    }
    Ok(b)
}
