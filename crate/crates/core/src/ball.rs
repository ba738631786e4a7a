//! Geometry of the unit ball in `R^{n+1}`: Poisson kernel, cap-averaged
//! kernel, and axially symmetric harmonic extensions.
//!
//! Points are written in axial coordinates `(phi, y)` where `phi` is the
//! polar angle to the south pole and `y = 1 - |z|` the distance to the unit
//! sphere. The cap-averaged kernel `mu(a, y, t)` is the mean of the Poisson
//! kernel over the boundary circle at polar angle `t`, and carries the whole
//! axially symmetric extension theory:
//!
//! ```text
//! u(a, y) = C(n) * ∫_0^pi  profile(t) * mu(a, y, t) * sin^{n-1} t  dt
//! ```
//!
//! with `C(n)` fixed so that the constant profile extends to the constant.
//! For `n <= 3` the azimuthal average has closed forms (a two-point mean on
//! the circle, a complete elliptic integral in `R^3`, a rational expression
//! in `R^4`); the quadrature mode evaluates the azimuthal integral directly
//! and is kept as an independent route for cross-checks.

use std::f64::consts::PI;
use std::sync::Arc;

use thiserror::Error;

use crate::elliptic::complete_elliptic_ke;
use crate::interp::{InterpError, Pchip};
use crate::quad::{integrate_with_knots, QuadConfig, QuadError};

/// Dimension parameter `n >= 1`; the ball lives in `R^{n+1}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub struct Dimension(u32);

impl Dimension {
    pub fn new(n: u32) -> Result<Self, GeometryError> {
        if n == 0 {
            return Err(GeometryError::InvalidDimension { n });
        }
        Ok(Dimension(n))
    }

    pub fn n(&self) -> u32 {
        self.0
    }

    pub fn nf(&self) -> f64 {
        self.0 as f64
    }

    /// Normalization constant `C(n) = 1 / ∫_0^pi sin^{n-1} t dt`, fixed by
    /// requiring that the extension of the constant 1 equals 1.
    pub fn profile_norm(&self) -> f64 {
        1.0 / sin_power_integral(self.0 - 1)
    }
}

impl std::fmt::Display for Dimension {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// `∫_0^pi sin^m t dt` by the exact reduction `I_m = I_{m-2}(m-1)/m`.
pub fn sin_power_integral(m: u32) -> f64 {
    let mut values = [PI, 2.0];
    if m < 2 {
        return values[m as usize];
    }
    let mut i = 2;
    loop {
        let v = values[(i % 2) as usize] * (i as f64 - 1.0) / i as f64;
        values[(i % 2) as usize] = v;
        if i == m {
            return v;
        }
        i += 1;
    }
}

/// Interior or boundary point in axial coordinates.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct BallPoint {
    /// Polar angle to the south pole, in `[0, pi]`.
    pub phi: f64,
    /// Boundary distance `1 - |z|`, in `[0, 1]`.
    pub y: f64,
}

impl BallPoint {
    pub fn new(phi: f64, y: f64) -> Result<Self, GeometryError> {
        if !(0.0..=PI).contains(&phi) || !phi.is_finite() {
            return Err(GeometryError::AngleRange {
                name: "phi",
                value: phi,
            });
        }
        if !(0.0..=1.0).contains(&y) || !y.is_finite() {
            return Err(GeometryError::BoundaryRange { y });
        }
        Ok(BallPoint { phi, y })
    }
}

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("dimension must satisfy n >= 1, got {n}")]
    InvalidDimension { n: u32 },
    #[error("angle out of range: {name} = {value}")]
    AngleRange { name: &'static str, value: f64 },
    #[error("boundary distance out of range: y = {y}")]
    BoundaryRange { y: f64 },
    #[error("poisson kernel is singular at y = 0, psi = 0")]
    SingularKernel,
    #[error("cap ordering requires t <= a, got t = {t}, a = {a}")]
    CapOrdering { t: f64, a: f64 },
    #[error("small-angle estimate requires a <= pi/2, got a = {a}")]
    SmallAngleDomain { a: f64 },
    #[error("averaged kernel is unbounded: y = 0 on the cap edge (a = t = {angle})")]
    UnboundedAverage { angle: f64 },
    #[error("interior point required (y > 0)")]
    NotInterior,
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error(transparent)]
    Interpolation(#[from] InterpError),
}

/// Poisson kernel for the unit ball of `R^{n+1}`, written in terms of the
/// boundary distance `y` of the argument and the angle `psi` between the
/// radius through the argument and the boundary point:
///
/// `P = y(2-y) / (y^2 + 4(1-y) sin^2(psi/2))^{(n+1)/2}`.
///
/// The denominator is `|z - xi|^2` in a cancellation-free form.
pub fn poisson_kernel(n: Dimension, y: f64, psi: f64) -> Result<f64, GeometryError> {
    if !(0.0..=1.0).contains(&y) {
        return Err(GeometryError::BoundaryRange { y });
    }
    let dist2 = chord_distance_sq(y, psi);
    if dist2 == 0.0 {
        return Err(GeometryError::SingularKernel);
    }
    Ok(y * (2.0 - y) / dist2.powf(0.5 * (n.nf() + 1.0)))
}

/// `|z - xi|^2` for `|z| = 1 - y` and angle `psi` between `z` and `xi`.
#[inline]
fn chord_distance_sq(y: f64, psi: f64) -> f64 {
    let s = (0.5 * psi).sin();
    y * y + 4.0 * (1.0 - y) * s * s
}

/// Distance between the boundary circles `S(0, t)` and `S(y, a)`:
/// `d^2 = 1 + (1-y)^2 - 2(1-y) cos(a - t)`, evaluated stably.
///
/// Zero exactly when `y = 0` and `a = t`.
pub fn cap_boundary_distance(y: f64, a: f64, t: f64) -> Result<f64, GeometryError> {
    if !(0.0..=1.0).contains(&y) {
        return Err(GeometryError::BoundaryRange { y });
    }
    if !(0.0..=PI).contains(&a) {
        return Err(GeometryError::AngleRange { name: "a", value: a });
    }
    if !(0.0..=a).contains(&t) {
        return Err(GeometryError::CapOrdering { t, a });
    }
    Ok(chord_distance_sq(y, a - t).sqrt())
}

/// Evaluation modes for the cap-averaged kernel.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MuMode {
    /// Exact average of the Poisson kernel over the circle `S(0, t)`.
    Quadrature,
    /// Two-sided comparison expression `y / (d^2 (d^{n-1} + sin^{n-1} a))`.
    Lemma1Estimate,
    /// Variant valid for `t <= a <= pi/2`:
    /// `y / (((a-t)^2 + y^2) (((a-t)^2 + y^2)^{(n-1)/2} + a^{n-1}))`.
    SmallAngleEstimate,
}

/// Cap-averaged Poisson kernel `mu(a, y, t)`.
///
/// `a` is the polar angle of the argument, `t` the polar angle of the
/// averaging circle. The estimate modes require `t <= a`; the quadrature
/// mode accepts any pair of angles (the average is symmetric in `a` and
/// `t`). At `y = 0` with `a = t` the average is unbounded and an error is
/// returned instead of a value.
pub fn averaged_kernel(
    n: Dimension,
    a: f64,
    y: f64,
    t: f64,
    mode: MuMode,
    cfg: &QuadConfig,
) -> Result<f64, GeometryError> {
    if !(0.0..=PI).contains(&a) {
        return Err(GeometryError::AngleRange { name: "a", value: a });
    }
    if !(0.0..=PI).contains(&t) {
        return Err(GeometryError::AngleRange { name: "t", value: t });
    }
    if !(0.0..=1.0).contains(&y) {
        return Err(GeometryError::BoundaryRange { y });
    }
    if y == 0.0 && a == t {
        return Err(GeometryError::UnboundedAverage { angle: a });
    }
    match mode {
        MuMode::Quadrature => mu_azimuthal_quadrature(n, a, y, t, cfg),
        MuMode::Lemma1Estimate => {
            if t > a {
                return Err(GeometryError::CapOrdering { t, a });
            }
            let d = chord_distance_sq(y, a - t).sqrt();
            let nm1 = n.n() - 1;
            Ok(y / (d * d * (d.powi(nm1 as i32) + a.sin().powi(nm1 as i32))))
        }
        MuMode::SmallAngleEstimate => {
            if t > a {
                return Err(GeometryError::CapOrdering { t, a });
            }
            if a > 0.5 * PI {
                return Err(GeometryError::SmallAngleDomain { a });
            }
            let q = (a - t) * (a - t) + y * y;
            let nm1 = 0.5 * (n.nf() - 1.0);
            Ok(y / (q * (q.powf(nm1) + a.powf(n.nf() - 1.0))))
        }
    }
}

/// Azimuthal quadrature route for `mu`: reduces the average over `S(0, t)`
/// to a 1-D integral over the azimuth with `cos psi = cos a cos t +
/// sin a sin t cos w` and weight `sin^{n-2} w` (two-point mean for `n = 1`).
fn mu_azimuthal_quadrature(
    n: Dimension,
    a: f64,
    y: f64,
    t: f64,
    cfg: &QuadConfig,
) -> Result<f64, GeometryError> {
    if y == 0.0 {
        // Kernel numerator vanishes; the singular configuration was already
        // rejected by the caller.
        return Ok(0.0);
    }
    if n.n() == 1 {
        let p1 = poisson_kernel(n, y, (a - t).abs())?;
        let p2 = poisson_kernel(n, y, a + t)?;
        return Ok(0.5 * (p1 + p2));
    }
    let coeff = 2.0 * (1.0 - y) * a.sin() * t.sin();
    let base = chord_distance_sq(y, a - t);
    let power = 0.5 * (n.nf() + 1.0);
    let scale = y * (2.0 - y);
    let weight_pow = (n.n() - 2) as i32;
    let integrand = |w: f64| {
        let sw = (0.5 * w).sin();
        let dist2 = base + 2.0 * coeff * sw * sw;
        let weight = if weight_pow == 0 {
            1.0
        } else {
            w.sin().powi(weight_pow)
        };
        weight * scale / dist2.powf(power)
    };
    // The integrand peaks at w = 0 when y is small and a ~ t; seed panels on
    // that scale.
    let peak_scale = ((a - t).abs() + y).min(0.5 * PI);
    let knots = [
        peak_scale,
        4.0 * peak_scale,
        16.0 * peak_scale,
        64.0 * peak_scale,
    ];
    let result = integrate_with_knots(integrand, 0.0, PI, &knots, cfg)?;
    Ok(result.value / sin_power_integral(n.n() - 2))
}

/// Exact averaged kernel by the fastest available route: closed forms for
/// `n <= 3`, adaptive azimuthal quadrature otherwise.
///
/// For `n = 2` the azimuthal average reduces to a complete elliptic
/// integral: `mu = y(2-y) * 2 E(k) / (pi d^2 d_+)` with
/// `d^2 = y^2 + 4(1-y) sin^2((a-t)/2)`, `d_+^2 = y^2 + 4(1-y) sin^2((a+t)/2)`
/// and `k^2 = 1 - d^2/d_+^2`. For `n = 3` it is rational:
/// `mu = y(2-y) / (d^2 d_+^2)`.
pub fn mu_exact(n: Dimension, a: f64, y: f64, t: f64) -> Result<f64, GeometryError> {
    if y == 0.0 && a == t {
        return Err(GeometryError::UnboundedAverage { angle: a });
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    match n.n() {
        1 => {
            let p1 = poisson_kernel(n, y, (a - t).abs())?;
            let p2 = poisson_kernel(n, y, a + t)?;
            Ok(0.5 * (p1 + p2))
        }
        2 => {
            let dm2 = chord_distance_sq(y, a - t);
            let dp2 = chord_distance_sq(y, a + t);
            let b = 2.0 * (1.0 - y) * a.sin() * t.sin();
            let k2 = (2.0 * b / dp2).clamp(0.0, 1.0 - f64::EPSILON);
            let (_, e) = complete_elliptic_ke(k2.sqrt());
            Ok(y * (2.0 - y) * 2.0 * e / (PI * dm2 * dp2.sqrt()))
        }
        3 => {
            let dm2 = chord_distance_sq(y, a - t);
            let dp2 = chord_distance_sq(y, a + t);
            Ok(y * (2.0 - y) / (dm2 * dp2))
        }
        _ => mu_azimuthal_quadrature(n, a, y, t, &QuadConfig::default()),
    }
}

/// Axially symmetric boundary data: a function of the polar angle on
/// `[0, pi]`, either callable or grid-backed with monotone cubic
/// interpolation. Knots mark locations where quadrature panels should split
/// (cap edges, surface corners).
#[derive(Clone)]
pub struct AxialBoundaryProfile {
    kind: ProfileKind,
    knots: Arc<Vec<f64>>,
}

#[derive(Clone)]
enum ProfileKind {
    Callable(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
    Grid(Arc<Pchip>),
}

impl std::fmt::Debug for AxialBoundaryProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.kind {
            ProfileKind::Callable(_) => write!(f, "AxialBoundaryProfile::Callable"),
            ProfileKind::Grid(_) => write!(f, "AxialBoundaryProfile::Grid"),
        }
    }
}

impl AxialBoundaryProfile {
    pub fn from_fn<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        AxialBoundaryProfile {
            kind: ProfileKind::Callable(Arc::new(f)),
            knots: Arc::new(Vec::new()),
        }
    }

    pub fn from_fn_with_knots<F: Fn(f64) -> f64 + Send + Sync + 'static>(
        f: F,
        knots: Vec<f64>,
    ) -> Self {
        AxialBoundaryProfile {
            kind: ProfileKind::Callable(Arc::new(f)),
            knots: Arc::new(knots),
        }
    }

    /// Grid-backed profile; the grid must be strictly increasing and cover
    /// `[0, pi]`.
    pub fn from_grid(ts: Vec<f64>, values: Vec<f64>) -> Result<Self, GeometryError> {
        if ts.first().copied() != Some(0.0) || ts.last().map(|&t| (t - PI).abs() > 1e-12) != Some(false)
        {
            return Err(GeometryError::AngleRange {
                name: "profile grid span",
                value: ts.last().copied().unwrap_or(f64::NAN),
            });
        }
        let interp = Pchip::new(ts, values)?;
        Ok(AxialBoundaryProfile {
            kind: ProfileKind::Grid(Arc::new(interp)),
            knots: Arc::new(Vec::new()),
        })
    }

    pub fn constant(c: f64) -> Self {
        Self::from_fn(move |_| c)
    }

    pub fn eval(&self, t: f64) -> f64 {
        match &self.kind {
            ProfileKind::Callable(f) => f(t),
            ProfileKind::Grid(p) => p.eval(t),
        }
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Profile multiplied by the indicator of the cap `t <= beta`
    /// (`inside = true`) or of its complement.
    pub fn masked_at(&self, beta: f64, inside: bool) -> AxialBoundaryProfile {
        let inner = self.clone();
        let mut knots: Vec<f64> = inner.knots().to_vec();
        knots.push(beta);
        AxialBoundaryProfile::from_fn_with_knots(
            move |t| {
                let in_cap = t <= beta;
                if in_cap == inside {
                    inner.eval(t)
                } else {
                    0.0
                }
            },
            knots,
        )
    }

    pub fn linear_combination(
        alpha: f64,
        f: &AxialBoundaryProfile,
        beta: f64,
        g: &AxialBoundaryProfile,
    ) -> AxialBoundaryProfile {
        let f = f.clone();
        let g = g.clone();
        let mut knots = f.knots().to_vec();
        knots.extend_from_slice(g.knots());
        AxialBoundaryProfile::from_fn_with_knots(
            move |t| alpha * f.eval(t) + beta * g.eval(t),
            knots,
        )
    }
}

/// Harmonic extension of axially symmetric boundary data, evaluated at one
/// interior point through the reduced Poisson representation.
pub fn harmonic_extension_axial(
    n: Dimension,
    profile: &AxialBoundaryProfile,
    point: BallPoint,
    cfg: &QuadConfig,
) -> Result<f64, GeometryError> {
    if point.y <= 0.0 {
        return Err(GeometryError::NotInterior);
    }
    let a = point.phi;
    let y = point.y;
    let power = (n.n() - 1) as i32;
    let integrand = |t: f64| {
        let mu = mu_exact(n, a, y, t).unwrap_or(f64::NAN);
        let w = if power == 0 { 1.0 } else { t.sin().powi(power) };
        profile.eval(t) * mu * w
    };
    let mut knots: Vec<f64> = profile.knots().to_vec();
    // The kernel concentrates around t = a on the scale of y; grade panels
    // geometrically from that scale out to the whole interval so the
    // refinement budget is spent inside the peak.
    knots.push(a);
    if y < 0.25 {
        let mut step = y;
        while step < PI {
            knots.push(a - step);
            knots.push(a + step);
            step *= 4.0;
        }
    }
    let result = integrate_with_knots(integrand, 0.0, PI, &knots, cfg)?;
    Ok(result.value * n.profile_norm())
}

/// Normalized cap integral `∫_{A(0, beta)} u dσ_n =
/// C(n) ∫_0^beta profile(t) sin^{n-1} t dt`; the full sphere has mass 1.
pub fn cap_average(
    n: Dimension,
    profile: &AxialBoundaryProfile,
    beta: f64,
    cfg: &QuadConfig,
) -> Result<f64, GeometryError> {
    if !(0.0..=PI).contains(&beta) {
        return Err(GeometryError::AngleRange {
            name: "beta",
            value: beta,
        });
    }
    if beta == 0.0 {
        return Ok(0.0);
    }
    let power = (n.n() - 1) as i32;
    let integrand = |t: f64| {
        let w = if power == 0 { 1.0 } else { t.sin().powi(power) };
        profile.eval(t) * w
    };
    let knots: Vec<f64> = profile
        .knots()
        .iter()
        .copied()
        .filter(|&k| k > 0.0 && k < beta)
        .collect();
    let result = integrate_with_knots(integrand, 0.0, beta, &knots, cfg)?;
    Ok(result.value * n.profile_norm())
}
