//! Adaptive one-dimensional quadrature.
//!
//! The workhorse is a globally adaptive Gauss–Kronrod (G7, K15) scheme that
//! keeps a worklist of panels and always splits the panel with the largest
//! error estimate. Integrands in this crate peak sharply near cap edges and
//! boundary distances, so callers can seed the panel list with knots at the
//! locations they know about.
//!
//! [`integrate_to_zero`] handles integrals over `(0, b]` whose integrand has
//! an algebraic singularity (or divergence) at the origin: it sums dyadic
//! shells toward zero and either converges geometrically or reports a
//! divergence verdict.

use std::collections::BinaryHeap;

use thiserror::Error;

/// 7-point Gauss nodes embedded in the 15-point Kronrod rule (positive half).
const XGK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];

const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];

const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

/// Tolerances and refinement budget for the adaptive scheme.
#[derive(Clone, Copy, Debug)]
pub struct QuadConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Maximum number of bisections applied to any initial panel.
    pub max_depth: u32,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig {
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            max_depth: 20,
        }
    }
}

impl QuadConfig {
    /// Same budget with both tolerances scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> QuadConfig {
        QuadConfig {
            rel_tol: self.rel_tol * factor,
            abs_tol: self.abs_tol * factor,
            max_depth: self.max_depth,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct QuadResult {
    pub value: f64,
    pub error_estimate: f64,
    pub evaluations: usize,
    pub panels: usize,
}

#[derive(Debug, Error)]
pub enum QuadError {
    /// The refinement budget ran out before the error estimate met the
    /// tolerance. Carries the last two global estimates so the caller can
    /// judge how far apart they are.
    #[error(
        "quadrature did not converge within the refinement budget: \
         last estimate {last:e}, previous {previous:e}, error {error:e} > tolerance {tolerance:e}"
    )]
    BudgetExceeded {
        last: f64,
        previous: f64,
        error: f64,
        tolerance: f64,
    },
    #[error("quadrature over empty or inverted interval [{lo}, {hi}]")]
    BadInterval { lo: f64, hi: f64 },
    #[error("integrand returned a non-finite value at x = {x}")]
    NonFinite { x: f64 },
}

struct Panel {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
    depth: u32,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

pub(crate) fn gk15<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Result<(f64, f64), QuadError> {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let mut kronrod = 0.0;
    let mut gauss = 0.0;
    for (i, &x) in XGK.iter().enumerate() {
        let dx = half * x;
        let (xa, xb) = (center - dx, center + dx);
        let fa = f(xa);
        if !fa.is_finite() {
            return Err(QuadError::NonFinite { x: xa });
        }
        let sum = if x == 0.0 {
            fa
        } else {
            let fb = f(xb);
            if !fb.is_finite() {
                return Err(QuadError::NonFinite { x: xb });
            }
            fa + fb
        };
        kronrod += WGK[i] * sum;
        if i % 2 == 1 {
            gauss += WG[i / 2] * sum;
        }
    }
    Ok((kronrod * half, (kronrod - gauss).abs() * half))
}

/// Adaptive integral of `f` over `[lo, hi]`.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    cfg: &QuadConfig,
) -> Result<QuadResult, QuadError> {
    integrate_with_knots(f, lo, hi, &[], cfg)
}

/// Adaptive integral with initial panel splits at the given knots.
///
/// Knots outside `(lo, hi)` are ignored; duplicates are merged. Useful when
/// the integrand has known kinks (cap edges) or sharp peaks (kernel
/// concentration at small boundary distance).
pub fn integrate_with_knots<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    knots: &[f64],
    cfg: &QuadConfig,
) -> Result<QuadResult, QuadError> {
    if !(lo < hi) {
        if lo == hi {
            return Ok(QuadResult {
                value: 0.0,
                error_estimate: 0.0,
                evaluations: 0,
                panels: 0,
            });
        }
        return Err(QuadError::BadInterval { lo, hi });
    }

    let mut cuts: Vec<f64> = knots
        .iter()
        .copied()
        .filter(|&k| k > lo && k < hi && k.is_finite())
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts.insert(0, lo);
    cuts.push(hi);

    let mut heap = BinaryHeap::new();
    let mut evaluations = 0usize;
    for pair in cuts.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if a == b {
            continue;
        }
        let (value, error) = gk15(&f, a, b)?;
        evaluations += 15;
        heap.push(Panel {
            lo: a,
            hi: b,
            value,
            error,
            depth: 0,
        });
    }

    let mut previous = f64::NAN;
    loop {
        let total: f64 = heap.iter().map(|p| p.value).sum();
        let total_err: f64 = heap.iter().map(|p| p.error).sum();
        let tolerance = cfg.abs_tol.max(cfg.rel_tol * total.abs());
        if total_err <= tolerance {
            return Ok(QuadResult {
                value: total,
                error_estimate: total_err,
                evaluations,
                panels: heap.len(),
            });
        }
        let worst = heap.peek().expect("non-empty panel list");
        let width_floor = f64::EPSILON * worst.lo.abs().max(worst.hi.abs());
        if worst.depth >= cfg.max_depth || worst.hi - worst.lo <= width_floor {
            return Err(QuadError::BudgetExceeded {
                last: total,
                previous: if previous.is_nan() { total } else { previous },
                error: total_err,
                tolerance,
            });
        }
        previous = total;
        let worst = heap.pop().unwrap();
        let mid = 0.5 * (worst.lo + worst.hi);
        let (v1, e1) = gk15(&f, worst.lo, mid)?;
        let (v2, e2) = gk15(&f, mid, worst.hi)?;
        evaluations += 30;
        heap.push(Panel {
            lo: worst.lo,
            hi: mid,
            value: v1,
            error: e1,
            depth: worst.depth + 1,
        });
        heap.push(Panel {
            lo: mid,
            hi: worst.hi,
            value: v2,
            error: e2,
            depth: worst.depth + 1,
        });
    }
}

/// Outcome of an integral over `(0, hi]` with a possible singularity at 0.
#[derive(Clone, Copy, Debug)]
pub enum ZeroLimit {
    Finite(QuadResult),
    /// Dyadic shell contributions toward 0 do not decay; the integral is
    /// reported divergent. Carries the number of shells examined and the
    /// last shell contribution.
    Divergent { shells: usize, last_shell: f64 },
}

/// Integral of `f` over `(0, hi]` by dyadic shells graded toward the origin.
///
/// Each shell `[hi·2^{-k-1}, hi·2^{-k}]` is integrated adaptively; shells are
/// accumulated until their contribution is negligible, then the geometric
/// tail is added. If the shell sequence refuses to decay (ratio persistently
/// close to 1 or above), the integral is declared divergent. The resolution
/// of that verdict is limited: integrands between `t^{-0.995}` and `t^{-1}`
/// are classified divergent.
pub fn integrate_to_zero<F: Fn(f64) -> f64>(
    f: F,
    hi: f64,
    cfg: &QuadConfig,
) -> Result<ZeroLimit, QuadError> {
    const MAX_SHELLS: usize = 512;
    const DIVERGENCE_RATIO: f64 = 0.995;
    const DIVERGENCE_PATIENCE: usize = 40;
    const GROWTH_PATIENCE: usize = 8;

    if !(hi > 0.0) {
        return Err(QuadError::BadInterval { lo: 0.0, hi });
    }

    let shell_cfg = cfg.scaled(0.1);
    let mut total = 0.0;
    let mut total_err = 0.0;
    let mut evaluations = 0usize;
    let mut panels = 0usize;
    let mut prev_shell: Option<f64> = None;
    let mut ratio = 0.5f64;
    let mut slow_shells = 0usize;
    let mut growing_shells = 0usize;

    for k in 0..MAX_SHELLS {
        let upper = hi * 0.5f64.powi(k as i32);
        let lower = 0.5 * upper;
        if upper < f64::MIN_POSITIVE * 1e16 {
            break;
        }
        let shell = integrate(&f, lower, upper, &shell_cfg)?;
        evaluations += shell.evaluations;
        panels += shell.panels;
        total += shell.value;
        total_err += shell.error_estimate;

        if let Some(prev) = prev_shell {
            if prev != 0.0 {
                ratio = (shell.value / prev).abs();
            }
        }
        prev_shell = Some(shell.value);

        if ratio >= DIVERGENCE_RATIO && shell.value.abs() > cfg.abs_tol {
            slow_shells += 1;
            if ratio > 1.0 + 1e-12 {
                growing_shells += 1;
            } else {
                growing_shells = 0;
            }
            if slow_shells >= DIVERGENCE_PATIENCE || (k >= 16 && growing_shells >= GROWTH_PATIENCE)
            {
                return Ok(ZeroLimit::Divergent {
                    shells: k + 1,
                    last_shell: shell.value,
                });
            }
        } else {
            slow_shells = 0;
            growing_shells = 0;
        }

        let tolerance = cfg.abs_tol.max(cfg.rel_tol * total.abs());
        // Remaining tail ≈ shell · ratio/(1-ratio) for a geometric sequence.
        if ratio < DIVERGENCE_RATIO {
            let tail = shell.value.abs() * ratio / (1.0 - ratio);
            if tail <= 0.5 * tolerance && k >= 4 {
                let tail_signed = shell.value * ratio / (1.0 - ratio);
                return Ok(ZeroLimit::Finite(QuadResult {
                    value: total + tail_signed,
                    error_estimate: total_err + tail,
                    evaluations,
                    panels,
                }));
            }
        }
    }

    Ok(ZeroLimit::Finite(QuadResult {
        value: total,
        error_estimate: total_err,
        evaluations,
        panels,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomial_is_exact() {
        let cfg = QuadConfig::default();
        let r = integrate(|x| 3.0 * x * x, 0.0, 2.0, &cfg).unwrap();
        assert_relative_eq!(r.value, 8.0, max_relative = 1e-13);
    }

    #[test]
    fn oscillatory_integrand() {
        let cfg = QuadConfig::default();
        let r = integrate(|x| x.sin(), 0.0, 30.0, &cfg).unwrap();
        assert_relative_eq!(r.value, 1.0 - 30.0f64.cos(), epsilon = 1e-9);
    }

    #[test]
    fn knots_split_kinks() {
        let cfg = QuadConfig::default();
        let f = |x: f64| (x - 1.0).abs();
        let r = integrate_with_knots(f, 0.0, 2.0, &[1.0], &cfg).unwrap();
        assert_relative_eq!(r.value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn inverse_sqrt_graded_to_zero() {
        let cfg = QuadConfig::default();
        match integrate_to_zero(|x| x.powf(-0.5), 1.0, &cfg).unwrap() {
            ZeroLimit::Finite(r) => assert_relative_eq!(r.value, 2.0, epsilon = 1e-8),
            ZeroLimit::Divergent { .. } => panic!("1/sqrt(x) is integrable"),
        }
    }

    #[test]
    fn one_over_x_flagged_divergent() {
        let cfg = QuadConfig::default();
        match integrate_to_zero(|x| 1.0 / x, 1.0, &cfg).unwrap() {
            ZeroLimit::Finite(r) => panic!("1/x must not converge, got {}", r.value),
            ZeroLimit::Divergent { .. } => {}
        }
    }

    #[test]
    fn budget_error_carries_last_two_estimates() {
        let cfg = QuadConfig {
            rel_tol: 1e-15,
            abs_tol: 1e-300,
            max_depth: 2,
        };
        // Non-smooth integrand that cannot converge at depth 2.
        let err = integrate(|x: f64| x.abs().powf(0.1), -1.0, 1.0, &cfg).unwrap_err();
        match err {
            QuadError::BudgetExceeded { last, previous, .. } => {
                assert!(last.is_finite() && previous.is_finite());
            }
            other => panic!("expected budget error, got {other:?}"),
        }
    }
}
