//! The auxiliary surface and its harmonic majorant.
//!
//! Given a normalized decreasing weight `k` on `[0, 1]` with
//! `k(0) <= lambda / beta^n` and `∫_0^1 (k/y)^{1/(n+1)} dy <= lambda^{1/(n+1)}`,
//! the surface is the graph `phi = gamma(y)` over the complement of the cap
//! of radius `beta`:
//!
//! ```text
//! gamma(y) = beta + (y / (k(y) beta^{n-1}))^{1/2}      on [0, s]
//! gamma(y) = beta + (y / k(y))^{1/(n+1)}               on [s, rho]
//! ```
//!
//! where `s` solves `y/k(y) = beta^{n+1}` (so both branches meet at
//! `gamma(s) = 2 beta`) and `rho` solves `y/k(y) = (pi - beta)^{n+1}` (so
//! `gamma(rho) = pi`). The harmonic function `v_a` extends the boundary data
//! `k(y(gamma))` outside the cap and `0` on the cap; on the surface it
//! dominates `k(y)`, which in turn dominates the cap-averaged kernel.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::ball::{
    harmonic_extension_axial, mu_exact, AxialBoundaryProfile, BallPoint, Dimension,
    GeometryError,
};
use crate::interp::{InterpError, Pchip};
use crate::quad::{integrate_to_zero, integrate_with_knots, QuadConfig, QuadError, ZeroLimit};
use crate::rng::SplitMix64;
use crate::roots::{bisect, RootError};

pub const LAMBDA_CAP: f64 = 1.0 / (3.0 * PI);

#[derive(Debug, Error)]
pub enum SurfaceError {
    #[error("lambda must lie in (0, 1/(3 pi)], got {lambda}")]
    LambdaRange { lambda: f64 },
    #[error("beta must lie in (0, pi/2], got {beta}")]
    BetaRange { beta: f64 },
    #[error("k(0) = {k0} is not finite and positive")]
    BadKAtZero { k0: f64 },
    #[error("k is not strictly decreasing near y = {y}")]
    KNotDecreasing { y: f64 },
    #[error("k(0) = {got} exceeds lambda/beta^n = {allowed}")]
    CapBoundViolated { got: f64, allowed: f64 },
    #[error("∫ (k/y)^(1/(n+1)) = {got} exceeds lambda^(1/(n+1)) = {allowed}")]
    IntegralBoundViolated { got: f64, allowed: f64 },
    #[error("the normalized weight integral diverges")]
    IntegralDivergent,
    #[error("no root bracket for y/k(y) = {target} on (0, 1]; the weight is inconsistent with the cap bounds")]
    RootBracket { target: f64 },
    #[error("surface graph is not strictly increasing near y = {y}")]
    NonMonotoneGamma { y: f64 },
    #[error("inverse surface map queried outside [beta, pi]: gamma = {gamma}")]
    InverseRange { gamma: f64 },
    #[error("surface point violates y <= gamma(y) - beta at y = {y} (gamma = {gamma})")]
    GapViolation { y: f64, gamma: f64 },
    #[error(transparent)]
    Root(#[from] RootError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error(transparent)]
    Interpolation(#[from] InterpError),
}

/// A decreasing weight satisfying the two cap bounds that make the surface
/// construction work.
#[derive(Clone)]
pub struct NormalizedWeightK {
    k: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    n: Dimension,
    lambda: f64,
    beta: f64,
    k0: f64,
    d_bound: f64,
}

impl NormalizedWeightK {
    /// Validate the invariants and compute the integral bound.
    pub fn new<F: Fn(f64) -> f64 + Send + Sync + 'static>(
        n: Dimension,
        k: F,
        lambda: f64,
        beta: f64,
    ) -> Result<Self, SurfaceError> {
        if !(lambda > 0.0 && lambda <= LAMBDA_CAP * (1.0 + 1e-12)) {
            return Err(SurfaceError::LambdaRange { lambda });
        }
        if !(beta > 0.0 && beta <= 0.5 * PI) {
            return Err(SurfaceError::BetaRange { beta });
        }
        let k0 = k(0.0);
        if !(k0.is_finite() && k0 > 0.0) {
            return Err(SurfaceError::BadKAtZero { k0 });
        }
        // Sampled monotonicity check (log grid plus linear tail).
        let mut prev = k0;
        for i in 1..=200 {
            let y = (i as f64 / 200.0).powi(3);
            let v = k(y);
            if v > prev * (1.0 + 1e-12) {
                return Err(SurfaceError::KNotDecreasing { y });
            }
            prev = v;
        }
        let allowed_k0 = lambda / beta.powi(n.n() as i32);
        if k0 > allowed_k0 * (1.0 + 1e-9) {
            return Err(SurfaceError::CapBoundViolated {
                got: k0,
                allowed: allowed_k0,
            });
        }
        let np1 = n.nf() + 1.0;
        let cfg = QuadConfig::default();
        let d_bound = match integrate_to_zero(|y| (k(y) / y).powf(1.0 / np1), 1.0, &cfg)? {
            ZeroLimit::Finite(r) => r.value,
            ZeroLimit::Divergent { .. } => return Err(SurfaceError::IntegralDivergent),
        };
        let allowed_d = lambda.powf(1.0 / np1);
        if d_bound > allowed_d * (1.0 + 1e-9) {
            return Err(SurfaceError::IntegralBoundViolated {
                got: d_bound,
                allowed: allowed_d,
            });
        }
        Ok(NormalizedWeightK {
            k: Arc::new(k),
            n,
            lambda,
            beta,
            k0,
            d_bound,
        })
    }

    pub fn k(&self, y: f64) -> f64 {
        (self.k)(y)
    }

    pub fn k0(&self) -> f64 {
        self.k0
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn dimension(&self) -> Dimension {
        self.n
    }

    /// The computed value of `∫_0^1 (k/y)^{1/(n+1)} dy`.
    pub fn d_bound(&self) -> f64 {
        self.d_bound
    }
}

impl std::fmt::Debug for NormalizedWeightK {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "NormalizedWeightK(n={}, lambda={:.3e}, beta={:.3e}, k0={:.3e}, D={:.3e})",
            self.n, self.lambda, self.beta, self.k0, self.d_bound
        )
    }
}

fn solve_ratio_equation(kw: &NormalizedWeightK, target: f64) -> Result<f64, SurfaceError> {
    // y/k(y) is strictly increasing from 0; bracket against y = 1.
    let g = |y: f64| y / kw.k(y) - target;
    let lo = 1e-300;
    if g(1.0) <= 0.0 {
        return Err(SurfaceError::RootBracket { target });
    }
    let root = bisect(g, lo, 1.0, 1e-13)?;
    Ok(root)
}

/// The matching radius `s`: unique root of `y/k(y) = beta^{n+1}`.
/// Satisfies `s = k(s) beta^{n+1} <= k(0) beta^{n+1} <= lambda beta`.
pub fn solve_s(kw: &NormalizedWeightK) -> Result<f64, SurfaceError> {
    let beta_pow = kw.beta().powi(kw.dimension().n() as i32 + 1);
    solve_ratio_equation(kw, beta_pow)
}

/// The outer radius `rho`: unique root of `y/k(y) = (pi - beta)^{n+1}`,
/// strictly less than 1 whenever the integral bound holds with the small
/// lambda used here.
pub fn solve_rho(kw: &NormalizedWeightK) -> Result<f64, SurfaceError> {
    let target = (PI - kw.beta()).powi(kw.dimension().n() as i32 + 1);
    solve_ratio_equation(kw, target)
}

/// The surface graph data: branch radii, a dense sample of the graph, and
/// the monotone inverse map used to read boundary data off the surface.
#[derive(Clone)]
pub struct SurfaceProfile {
    kw: NormalizedWeightK,
    pub s: f64,
    pub rho: f64,
    grid: Arc<Vec<(f64, f64)>>,
    inverse: Arc<Pchip>,
}

impl SurfaceProfile {
    pub fn beta(&self) -> f64 {
        self.kw.beta()
    }

    pub fn weight(&self) -> &NormalizedWeightK {
        &self.kw
    }

    /// The graph `gamma(y)`, evaluated from the branch formulas.
    pub fn gamma(&self, y: f64) -> f64 {
        let beta = self.kw.beta();
        if y <= 0.0 {
            return beta;
        }
        let ratio = y / self.kw.k(y);
        if y <= self.s {
            beta + (ratio / beta.powi(self.kw.dimension().n() as i32 - 1)).sqrt()
        } else {
            beta + ratio.powf(1.0 / (self.kw.dimension().nf() + 1.0))
        }
    }

    /// Inverse map `gamma -> y` on `[beta, pi]` by monotone interpolation.
    pub fn inverse_gamma(&self, gamma: f64) -> Result<f64, SurfaceError> {
        let beta = self.kw.beta();
        if gamma < beta - 1e-12 || gamma > PI + 1e-9 {
            return Err(SurfaceError::InverseRange { gamma });
        }
        Ok(self.inverse.eval(gamma).clamp(0.0, self.rho))
    }

    /// Dense `(y, gamma)` sample of the graph, increasing in `y`.
    pub fn grid(&self) -> &[(f64, f64)] {
        &self.grid
    }
}

impl std::fmt::Debug for SurfaceProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "SurfaceProfile(s={:.6e}, rho={:.6e}, beta={:.6e})",
            self.s,
            self.rho,
            self.beta()
        )
    }
}

/// Build the surface graph and its inverse.
///
/// The sample grid uses ~10^4 points, log-spaced over `(0, rho]` with extra
/// resolution around the branch point `s`.
pub fn build_surface(kw: &NormalizedWeightK) -> Result<SurfaceProfile, SurfaceError> {
    let s = solve_s(kw)?;
    let rho = solve_rho(kw)?;

    let mut ys: Vec<f64> = Vec::with_capacity(10_500);
    ys.push(0.0);
    let (lo, hi) = ((rho * 1e-10).ln(), rho.ln());
    for i in 0..8_000 {
        ys.push((lo + (hi - lo) * i as f64 / 7_999.0).exp());
    }
    // Extra band straddling the branch point.
    let (blo, bhi) = (0.8 * s, (1.25 * s).min(rho));
    for i in 0..2_000 {
        ys.push(blo + (bhi - blo) * i as f64 / 1_999.0);
    }
    ys.push(s);
    ys.push(rho);
    ys.sort_by(f64::total_cmp);
    ys.dedup();

    let profile = SurfaceProfile {
        kw: kw.clone(),
        s,
        rho,
        grid: Arc::new(Vec::new()),
        inverse: Arc::new(Pchip::new(vec![0.0, 1.0], vec![0.0, 1.0])?),
    };
    let mut grid: Vec<(f64, f64)> = Vec::with_capacity(ys.len());
    let mut prev_gamma = f64::NEG_INFINITY;
    for &y in &ys {
        let gamma = profile.gamma(y);
        if gamma <= prev_gamma {
            if gamma < prev_gamma - 1e-13 {
                return Err(SurfaceError::NonMonotoneGamma { y });
            }
            continue; // drop exact ties from the merged grids
        }
        grid.push((y, gamma));
        prev_gamma = gamma;
    }

    let gammas: Vec<f64> = grid.iter().map(|&(_, g)| g).collect();
    let yvals: Vec<f64> = grid.iter().map(|&(y, _)| y).collect();
    let inverse = Pchip::new(gammas, yvals)?;

    Ok(SurfaceProfile {
        kw: kw.clone(),
        s,
        rho,
        grid: Arc::new(grid),
        inverse: Arc::new(inverse),
    })
}

/// Boundary data of the harmonic majorant and its value at the origin.
///
/// The boundary profile is `k(y(gamma))` for polar angles in `[beta, pi]`
/// and `0` on the cap; the origin value is the reduced integral
/// `C(n) ∫_beta^pi k(y(gamma)) sin^{n-1} gamma d gamma`.
pub fn build_va(
    kw: &NormalizedWeightK,
    surface: &SurfaceProfile,
) -> Result<(AxialBoundaryProfile, f64), SurfaceError> {
    let beta = kw.beta();
    let n = kw.dimension();
    let surf = surface.clone();
    let kw_inner = kw.clone();
    let profile = AxialBoundaryProfile::from_fn_with_knots(
        move |t| {
            if t < beta {
                0.0
            } else {
                match surf.inverse_gamma(t) {
                    Ok(y) => kw_inner.k(y),
                    Err(_) => f64::NAN,
                }
            }
        },
        vec![beta, 2.0 * beta],
    );

    let power = (n.n() - 1) as i32;
    let surf2 = surface.clone();
    let kw2 = kw.clone();
    let integrand = move |g: f64| {
        let y = surf2.inverse_gamma(g).unwrap_or(f64::NAN);
        let w = if power == 0 { 1.0 } else { g.sin().powi(power) };
        kw2.k(y) * w
    };
    let cfg = QuadConfig::default();
    let va0 = integrate_with_knots(integrand, beta, PI, &[2.0 * beta], &cfg)?.value
        * n.profile_norm();
    Ok((profile, va0))
}

/// Measured constants from a sweep over surface points.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SurfaceBoundsRecord {
    pub samples: usize,
    /// Hard invariant `y <= gamma(y) - beta` held at every sample.
    pub gap_pass: bool,
    /// Max of `y / (gamma(y) - beta)`; bounded by `max(lambda, lambda^{1/(n+1)})`.
    pub max_y_over_gap: f64,
    /// Measured upper constant in `mu(x, y, beta) <= C k(y)` on the surface.
    pub mu_over_k_max: f64,
    /// Measured lower constant in `v_a(x, y) >= c k(y)` on the surface.
    pub va_over_k_min: f64,
    pub va_origin: f64,
}

/// Sweep sample points on the surface and measure the comparison constants.
///
/// Sample `y` values are log-uniform over `(rho * 1e-6, rho)`, seeded for
/// reproducibility; the branch point is always included. Any failure of the
/// hard gap inequality aborts with an error.
pub fn verify_surface_bounds(
    kw: &NormalizedWeightK,
    surface: &SurfaceProfile,
    sample_count: usize,
    seed: u64,
) -> Result<SurfaceBoundsRecord, SurfaceError> {
    let n = kw.dimension();
    let beta = kw.beta();
    let (va_profile, va0) = build_va(kw, surface)?;
    let cfg = QuadConfig {
        rel_tol: 1e-8,
        abs_tol: 1e-12,
        max_depth: 20,
    };

    let mut rng = SplitMix64::new(seed);
    let mut ys: Vec<f64> = (0..sample_count.saturating_sub(1))
        .map(|_| rng.log_uniform(surface.rho * 1e-6, surface.rho))
        .collect();
    ys.push(surface.s);

    let mut max_y_over_gap = 0.0f64;
    let mut mu_over_k_max = 0.0f64;
    let mut va_over_k_min = f64::INFINITY;
    for &y in &ys {
        let gamma = surface.gamma(y);
        let gap = gamma - beta;
        if y > gap {
            return Err(SurfaceError::GapViolation { y, gamma });
        }
        max_y_over_gap = max_y_over_gap.max(y / gap);
        let k_here = kw.k(y);
        let mu = mu_exact(n, gamma, y, beta)?;
        mu_over_k_max = mu_over_k_max.max(mu / k_here);
        let va = harmonic_extension_axial(n, &va_profile, BallPoint::new(gamma, y)?, &cfg)?;
        va_over_k_min = va_over_k_min.min(va / k_here);
    }

    Ok(SurfaceBoundsRecord {
        samples: ys.len(),
        gap_pass: true,
        max_y_over_gap,
        mu_over_k_max,
        va_over_k_min,
        va_origin: va0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn dim(n: u32) -> Dimension {
        Dimension::new(n).unwrap()
    }

    /// A weight of the pipeline shape `w(y + theta - y theta)` normalized to
    /// the cap bounds, for the power family.
    fn pipeline_weight(n: u32, p: f64, theta: f64, lambda: f64) -> (NormalizedWeightK, f64) {
        let nd = dim(n);
        let alpha = theta / (10.0 * p);
        let beta = alpha;
        let norm = theta.powf(-p) * alpha.powi(n as i32);
        let raw = move |y: f64| (y + theta - y * theta).powf(-p) / norm;
        // Normalize per the cap bounds.
        let cfg = QuadConfig::default();
        let d = match integrate_to_zero(
            |y| (raw(y) / y).powf(1.0 / (n as f64 + 1.0)),
            1.0,
            &cfg,
        )
        .unwrap()
        {
            ZeroLimit::Finite(r) => r.value,
            ZeroLimit::Divergent { .. } => panic!("divergent pipeline weight"),
        };
        let denom = d.powi(n as i32 + 1) + raw(0.0) * beta.powi(n as i32);
        let factor = lambda / denom;
        (
            NormalizedWeightK::new(nd, move |y| factor * raw(y), lambda, beta).unwrap(),
            factor,
        )
    }

    #[test]
    fn constant_weight_closed_forms() {
        // k constant: s = k0 beta^{n+1}, rho = k0 (pi - beta)^{n+1}.
        let n = dim(1);
        let beta = 0.05f64;
        let lambda = 1e-3;
        // The integral bound for a constant k is 2 sqrt(k0) <= sqrt(lambda),
        // i.e. k0 <= lambda/4; stay inside both bounds.
        let k0 = lambda / 10.0;
        let kw = match NormalizedWeightK::new(n, move |_| k0, lambda, beta) {
            Ok(kw) => kw,
            Err(e) => panic!("constant weight rejected: {e}"),
        };
        let s = solve_s(&kw).unwrap();
        assert_relative_eq!(s, k0 * beta.powi(2), max_relative = 1e-10);
        let rho = solve_rho(&kw).unwrap();
        assert_relative_eq!(rho, k0 * (PI - beta).powi(2), max_relative = 1e-10);
        assert!(rho > s && rho < 1.0);
    }

    #[test]
    fn rational_weight_quadratic_oracle() {
        // k = k0/(1+y), n = 1: s solves y(1+y) = k0 beta^2, i.e. the
        // positive root of the quadratic.
        let beta = 0.1f64;
        let lambda = 1e-3;
        let k0 = lambda / 10.0;
        let kw = NormalizedWeightK::new(dim(1), move |y| k0 / (1.0 + y), lambda, beta).unwrap();
        let s = solve_s(&kw).unwrap();
        let c = k0 * beta * beta;
        let oracle = 0.5 * (-1.0 + (1.0 + 4.0 * c).sqrt());
        assert_relative_eq!(s, oracle, max_relative = 1e-10);
    }

    #[test]
    fn rho_matches_fine_grid_scan() {
        // Bisection cross-checked against a brute scan for the first sign
        // change of y/k(y) - (pi - beta)^{n+1}.
        let (kw, _) = pipeline_weight(1, 2.0, 0.1, 1e-3);
        let s = solve_s(&kw).unwrap();
        let rho = solve_rho(&kw).unwrap();
        assert!(s < rho && rho < 1.0);
        let target = (PI - kw.beta()).powi(2);
        let mut bracket = None;
        let grid: Vec<f64> = (1..=2_000_000).map(|i| i as f64 / 2_000_000.0).collect();
        for pair in grid.windows(2) {
            let g0 = pair[0] / kw.k(pair[0]) - target;
            let g1 = pair[1] / kw.k(pair[1]) - target;
            if g0 <= 0.0 && g1 > 0.0 {
                bracket = Some((pair[0], pair[1]));
                break;
            }
        }
        let (lo, hi) = bracket.expect("scan finds the crossing");
        assert!(rho >= lo && rho <= hi, "rho = {rho} outside [{lo}, {hi}]");
    }

    #[test]
    fn branch_continuity_and_endpoints() {
        let (kw, _) = pipeline_weight(1, 2.0, 0.1, 1e-3);
        let surface = build_surface(&kw).unwrap();
        let beta = kw.beta();
        // gamma(0) = beta, gamma(s) = 2 beta from both branches, gamma(rho) = pi.
        assert_abs_diff_eq!(surface.gamma(0.0), beta, epsilon = 1e-15);
        let s = surface.s;
        let lower = beta + (s / (kw.k(s) * beta.powi(0))).sqrt();
        let upper = beta + (s / kw.k(s)).powf(0.5);
        assert_abs_diff_eq!(lower, upper, epsilon = 1e-10);
        assert_abs_diff_eq!(surface.gamma(s), 2.0 * beta, epsilon = 1e-9);
        assert_abs_diff_eq!(surface.gamma(surface.rho), PI, epsilon = 1e-8);
        assert!(surface.s <= kw.lambda() * beta * (1.0 + 1e-9));
    }

    #[test]
    fn gamma_grid_strictly_increasing() {
        let (kw, _) = pipeline_weight(1, 2.0, 0.1, 1e-3);
        let surface = build_surface(&kw).unwrap();
        let grid = surface.grid();
        assert!(grid.len() > 9_000);
        for w in grid.windows(2) {
            assert!(w[1].1 > w[0].1);
        }
    }

    #[test]
    fn inverse_map_roundtrips() {
        let (kw, _) = pipeline_weight(2, 4.0, 0.1, 1e-3);
        let surface = build_surface(&kw).unwrap();
        for &y in &[surface.rho * 1e-4, surface.s, 0.5 * surface.rho, surface.rho] {
            let gamma = surface.gamma(y);
            let back = surface.inverse_gamma(gamma).unwrap();
            assert_relative_eq!(back, y, max_relative = 1e-6);
        }
        assert!(surface.inverse_gamma(kw.beta() - 0.01).is_err());
    }

    #[test]
    fn va_profile_values() {
        let (kw, _) = pipeline_weight(1, 2.0, 0.1, 1e-3);
        let surface = build_surface(&kw).unwrap();
        let (profile, va0) = build_va(&kw, &surface).unwrap();
        let beta = kw.beta();
        // Zero on the cap.
        assert_eq!(profile.eval(0.5 * beta), 0.0);
        // k(s) at the branch angle 2 beta.
        assert_relative_eq!(profile.eval(2.0 * beta), kw.k(surface.s), max_relative = 1e-4);
        assert!(va0 > 0.0);
    }

    #[test]
    fn origin_value_scales_with_lambda() {
        // v_a(0) / lambda^{1/(n+1)} stable across two decades of lambda.
        let mut ratios = Vec::new();
        for &lambda in &[1e-3, 1e-4] {
            let (kw, _) = pipeline_weight(1, 2.0, 0.1, lambda);
            let surface = build_surface(&kw).unwrap();
            let (_, va0) = build_va(&kw, &surface).unwrap();
            ratios.push(va0 / lambda.powf(0.5));
        }
        let (a, b) = (ratios[0], ratios[1]);
        assert!(a > 0.0 && b > 0.0);
        let spread = (a / b).max(b / a);
        assert!(spread < 3.0, "C0 varied by factor {spread}");
    }

    #[test]
    fn surface_bounds_sweep() {
        for n in [1u32, 2] {
            let (kw, _) = pipeline_weight(n, 2.0 * n as f64, 0.1, 1e-3);
            let surface = build_surface(&kw).unwrap();
            let rec = verify_surface_bounds(&kw, &surface, 100, 42).unwrap();
            assert!(rec.gap_pass);
            let cap = kw
                .lambda()
                .max(kw.lambda().powf(1.0 / (n as f64 + 1.0)));
            assert!(rec.max_y_over_gap <= cap * (1.0 + 1e-9));
            assert!(rec.mu_over_k_max.is_finite() && rec.mu_over_k_max > 0.0);
            assert!(rec.va_over_k_min > 0.0, "v_a/k min = {}", rec.va_over_k_min);
        }
    }

    #[test]
    fn va_boundary_profile_non_increasing() {
        let (kw, _) = pipeline_weight(1, 2.0, 0.1, 1e-3);
        let surface = build_surface(&kw).unwrap();
        let (profile, _) = build_va(&kw, &surface).unwrap();
        let beta = kw.beta();
        let mut prev = f64::INFINITY;
        for i in 0..=200 {
            let t = beta + (PI - beta) * i as f64 / 200.0;
            let v = profile.eval(t);
            assert!(v <= prev * (1.0 + 1e-6), "profile increases at t = {t}");
            prev = v;
        }
    }

    #[test]
    fn invariant_violations_are_rejected() {
        let n = dim(1);
        // k(0) too large for the cap bound.
        let r = NormalizedWeightK::new(n, |_| 1.0, 1e-3, 0.1);
        assert!(matches!(r, Err(SurfaceError::CapBoundViolated { .. })));
        // Increasing k.
        let r = NormalizedWeightK::new(n, |y| 1e-6 * (1.0 + y), 1e-3, 0.1);
        assert!(matches!(r, Err(SurfaceError::KNotDecreasing { .. })));
        // lambda outside the admissible range.
        let r = NormalizedWeightK::new(n, |_| 1e-6, 0.5, 0.1);
        assert!(matches!(r, Err(SurfaceError::LambdaRange { .. })));
    }
}
