//! Bracketed root finding.
//!
//! Everything the surface construction needs is covered by bisection on a
//! monotone function, optionally polished by a few Newton steps when a
//! derivative is available. Robustness beats speed at desk scale.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RootError {
    #[error("no sign change on [{lo}, {hi}]: f(lo) = {flo:e}, f(hi) = {fhi:e}")]
    NoBracket { lo: f64, hi: f64, flo: f64, fhi: f64 },
    #[error("invalid bracket [{lo}, {hi}]")]
    BadBracket { lo: f64, hi: f64 },
}

/// Root of `f` on `[lo, hi]` by bisection to relative tolerance `rel_tol`.
///
/// Requires a sign change across the bracket. Returns the midpoint of the
/// final interval.
pub fn bisect<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    rel_tol: f64,
) -> Result<f64, RootError> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(RootError::BadBracket { lo, hi });
    }
    let mut a = lo;
    let mut b = hi;
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(RootError::NoBracket {
            lo,
            hi,
            flo: fa,
            fhi: fb,
        });
    }
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if (b - a) <= rel_tol * mid.abs().max(f64::MIN_POSITIVE) || mid == a || mid == b {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

/// One or two Newton corrections applied to a bisection result, guarded so a
/// wild step never leaves the original bracket.
pub fn newton_polish<F, D>(f: F, df: D, x0: f64, lo: f64, hi: f64) -> f64
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let mut x = x0;
    for _ in 0..2 {
        let d = df(x);
        if d == 0.0 || !d.is_finite() {
            break;
        }
        let step = f(x) / d;
        let candidate = x - step;
        if candidate.is_finite() && candidate > lo && candidate < hi {
            x = candidate;
        } else {
            break;
        }
    }
    x
}
