//! Weights and their regularity calculus.
//!
//! A weight is a strictly decreasing positive function on `(0, 1]`,
//! normalized to `w(1) = 1`, that serves as a one-sided majorant
//! `U(z) <= w(1 - |z|)` for harmonic functions. The regularity conditions
//! that make the reverse bound work are all expressed through the ratio
//! `w/w'` and its derivative, so every family here exposes exact
//! *logarithmic* derivatives: rapidly growing weights (`exp(1/y)` and
//! friends) overflow `f64` long before the conditions become ill-posed, and
//! ratios of log-values stay finite where raw values do not.
//!
//! The built-in families:
//!
//! * `power(p)`        - `y^{-p}`
//! * `power_log(p, q)` - `y^{-p} (1 + |log y|)^q`
//! * `exp_inv(a)`      - `e^{a/y} / e^a`
//! * `threshold(n)`    - `y^{-n}`, the growth threshold for dimension `n`
//! * `log_threshold(n)`- `y^{-n} (1 + |log y|^{n+1})`

use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::ball::Dimension;
use crate::quad::{integrate_to_zero, QuadConfig, QuadError, ZeroLimit};

const ALPHA_COEFF: f64 = 10.0;

#[derive(Debug, Error)]
pub enum WeightError {
    #[error("weight is not strictly decreasing at y = {y} (w'/w = {dlog:e})")]
    Monotonicity { y: f64, dlog: f64 },
    #[error("argument out of the weight domain (0, 1]: y = {y}")]
    Domain { y: f64 },
    #[error("alpha(theta) is only defined for 0 < theta < 1, got {theta}")]
    AlphaDomain { theta: f64 },
    #[error("theta - 2 alpha(theta) = {shifted} is not positive (theta = {theta}, alpha = {alpha})")]
    DoublingDomain { theta: f64, alpha: f64, shifted: f64 },
    #[error("condition grid needs at least 50 points in (0, 1], got {points}")]
    GridTooCoarse { points: usize },
    #[error("condition grid leaves (0, 1] at y = {y}")]
    GridRange { y: f64 },
    #[error("finite differences too noisy for (w/w')' (estimated noise {noise:e}); supply a second derivative")]
    DerivativeNoise { noise: f64 },
    #[error("patch construction failed: (w/w')' >= 0 at every candidate matching point at or below y0 = {y0}")]
    PatchNotAdmissible { y0: f64 },
    #[error("patch matching system is singular at y1 = {y1}")]
    PatchSingular { y1: f64 },
    #[error("invalid weight parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("malformed weight spec near '{token}'")]
    Parse { token: String },
    #[error(transparent)]
    Quadrature(#[from] QuadError),
}

#[derive(Clone)]
enum Family {
    Power { p: f64 },
    PowerLog { p: f64, q: f64 },
    ExpInv { a: f64 },
    LogThreshold { m: u32 },
    Patched(Box<PatchedWeight>),
    Custom(CustomWeight),
}

#[derive(Clone)]
struct PatchedWeight {
    inner: Weight,
    y1: f64,
    /// Multiplier applied to the inner weight on `(0, y1]`.
    inner_scale: f64,
    c: f64,
    b: f64,
    s: f64,
}

#[derive(Clone)]
struct CustomWeight {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    df: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
    d2f: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
}

/// A strictly decreasing positive weight on `(0, 1]`.
#[derive(Clone)]
pub struct Weight {
    family: Family,
    scale: f64,
    descriptor: String,
}

impl std::fmt::Debug for Weight {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Weight({})", self.descriptor)
    }
}

impl Weight {
    pub fn power(p: f64) -> Result<Self, WeightError> {
        if !(p >= 0.0) || !p.is_finite() {
            return Err(WeightError::InvalidParameter { name: "p", value: p });
        }
        Ok(Weight {
            family: Family::Power { p },
            scale: 1.0,
            descriptor: format!("power p={p}"),
        })
    }

    pub fn power_log(p: f64, q: f64) -> Result<Self, WeightError> {
        if !(p > 0.0) || !p.is_finite() || !q.is_finite() {
            return Err(WeightError::InvalidParameter { name: "p", value: p });
        }
        Ok(Weight {
            family: Family::PowerLog { p, q },
            scale: 1.0,
            descriptor: format!("power_log p={p} q={q}"),
        })
    }

    pub fn exp_inv(a: f64) -> Result<Self, WeightError> {
        if !(a > 0.0) || !a.is_finite() {
            return Err(WeightError::InvalidParameter { name: "a", value: a });
        }
        Ok(Weight {
            family: Family::ExpInv { a },
            scale: 1.0,
            descriptor: format!("exp_inv a={a}"),
        })
    }

    /// Threshold weight `y^{-n}` for the given dimension.
    pub fn threshold(n: Dimension) -> Self {
        Weight {
            family: Family::Power { p: n.nf() },
            scale: 1.0,
            descriptor: format!("threshold n={n}"),
        }
    }

    /// `y^{-n} (1 + |log y|^{n+1})`: the sharpened threshold envelope.
    pub fn log_threshold(n: Dimension) -> Self {
        Weight {
            family: Family::LogThreshold { m: n.n() },
            scale: 1.0,
            descriptor: format!("log_threshold n={n}"),
        }
    }

    /// User-supplied weight; derivatives fall back to central differences
    /// with step `h = y * 1e-5` when not provided. The function is
    /// renormalized so that `w(1) = 1`; the applied factor is retained in
    /// [`Weight::normalization`].
    pub fn custom<F>(f: F, df: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>, d2f: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>) -> Result<Self, WeightError>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let at_one = f(1.0);
        if !(at_one > 0.0) || !at_one.is_finite() {
            return Err(WeightError::InvalidParameter {
                name: "w(1)",
                value: at_one,
            });
        }
        Ok(Weight {
            family: Family::Custom(CustomWeight {
                f: Arc::new(f),
                df,
                d2f,
            }),
            scale: 1.0 / at_one,
            descriptor: "custom".to_string(),
        })
    }

    /// Parse the CLI weight grammar: a space-separated `key=value` list
    /// starting with the family, e.g. `family=power p=4`.
    pub fn parse(spec: &str) -> Result<Self, WeightError> {
        let mut family: Option<&str> = None;
        let mut params: Vec<(&str, f64)> = Vec::new();
        for token in spec.split_whitespace() {
            let (key, value) = token.split_once('=').ok_or_else(|| WeightError::Parse {
                token: token.to_string(),
            })?;
            if key == "family" {
                family = Some(value);
            } else {
                let parsed = value.parse::<f64>().map_err(|_| WeightError::Parse {
                    token: token.to_string(),
                })?;
                params.push((key, parsed));
            }
        }
        let family = family.ok_or_else(|| WeightError::Parse {
            token: spec.trim().to_string(),
        })?;
        let get = |name: &str| -> Result<f64, WeightError> {
            params
                .iter()
                .find(|(k, _)| *k == name)
                .map(|(_, v)| *v)
                .ok_or_else(|| WeightError::Parse {
                    token: format!("missing {name}"),
                })
        };
        match family {
            "power" => Weight::power(get("p")?),
            "power_log" => Weight::power_log(get("p")?, get("q")?),
            "exp_inv" => Weight::exp_inv(get("a")?),
            "threshold" => {
                let n = get("n")? as u32;
                Ok(Weight::threshold(Dimension::new(n).map_err(|_| {
                    WeightError::InvalidParameter {
                        name: "n",
                        value: n as f64,
                    }
                })?))
            }
            "log_threshold" => {
                let n = get("n")? as u32;
                Ok(Weight::log_threshold(Dimension::new(n).map_err(|_| {
                    WeightError::InvalidParameter {
                        name: "n",
                        value: n as f64,
                    }
                })?))
            }
            other => Err(WeightError::Parse {
                token: format!("family={other}"),
            }),
        }
    }

    /// Same weight multiplied by a positive constant. The scale is visible
    /// through [`Weight::normalization`].
    pub fn scaled_by(&self, factor: f64) -> Weight {
        let mut w = self.clone();
        w.scale *= factor;
        w.descriptor = format!("{} x{factor}", self.descriptor);
        w
    }

    /// Multiplicative normalization applied on top of the family formula.
    pub fn normalization(&self) -> f64 {
        self.scale
    }

    pub fn descriptor(&self) -> &str {
        &self.descriptor
    }

    pub fn value(&self, y: f64) -> f64 {
        self.scale * self.base_value(y)
    }

    /// Natural log of the weight, exact for the built-in families even where
    /// the value itself overflows.
    pub fn log_value(&self, y: f64) -> f64 {
        self.scale.ln() + self.base_log_value(y)
    }

    /// `log(w(num)/w(den))`; the normalization factor cancels symbolically,
    /// so ratios are invariant under rescaling the weight, bit for bit.
    pub fn log_ratio(&self, num: f64, den: f64) -> f64 {
        self.base_log_value(num) - self.base_log_value(den)
    }

    fn base_value(&self, y: f64) -> f64 {
        match &self.family {
            Family::Power { p } => y.powf(-p),
            Family::PowerLog { p, q } => y.powf(-p) * (1.0 - y.ln()).powf(*q),
            Family::ExpInv { a } => (a / y - a).exp(),
            Family::LogThreshold { m } => {
                let l = -y.ln();
                y.powi(-(*m as i32)) * (1.0 + l.powi(*m as i32 + 1))
            }
            Family::Patched(p) => {
                if y <= p.y1 {
                    p.inner_scale * p.inner.value(y)
                } else {
                    p.c * (y + p.b).powf(p.s)
                }
            }
            Family::Custom(c) => (c.f)(y),
        }
    }

    fn base_log_value(&self, y: f64) -> f64 {
        match &self.family {
            Family::Power { p } => -p * y.ln(),
            Family::PowerLog { p, q } => -p * y.ln() + q * (1.0 - y.ln()).ln(),
            Family::ExpInv { a } => a / y - a,
            Family::LogThreshold { m } => {
                let l = -y.ln();
                -(*m as f64) * y.ln() + (1.0 + l.powi(*m as i32 + 1)).ln()
            }
            Family::Patched(p) => {
                if y <= p.y1 {
                    p.inner_scale.ln() + p.inner.log_value(y)
                } else {
                    p.c.ln() + p.s * (y + p.b).ln()
                }
            }
            Family::Custom(c) => (c.f)(y).ln(),
        }
    }

    /// Logarithmic derivative `w'(y)/w(y)`; exact per family, finite even
    /// where the value overflows.
    pub fn dlog(&self, y: f64) -> f64 {
        match &self.family {
            Family::Power { p } => -p / y,
            Family::PowerLog { p, q } => -(p + q / (1.0 - y.ln())) / y,
            Family::ExpInv { a } => -a / (y * y),
            Family::LogThreshold { m } => {
                let mf = *m as f64;
                let l = -y.ln();
                -(mf + log_threshold_g(mf, l)) / y
            }
            Family::Patched(p) => {
                if y <= p.y1 {
                    p.inner.dlog(y)
                } else {
                    p.s / (y + p.b)
                }
            }
            Family::Custom(c) => {
                let w = (c.f)(y);
                match &c.df {
                    Some(df) => df(y) / w,
                    None => central_difference(&*c.f, y) / w,
                }
            }
        }
    }

    /// Derivative of the logarithmic derivative, `(w'/w)'`.
    fn dlog_prime(&self, y: f64) -> f64 {
        match &self.family {
            Family::Power { p } => p / (y * y),
            Family::PowerLog { p, q } => {
                let a = 1.0 - y.ln();
                (p + q / a - q / (a * a)) / (y * y)
            }
            Family::ExpInv { a } => 2.0 * a / (y * y * y),
            Family::LogThreshold { m } => {
                let mf = *m as f64;
                let l = -y.ln();
                let g = log_threshold_g(mf, l);
                let gp = log_threshold_g_prime(mf, l);
                (mf + g + gp) / (y * y)
            }
            Family::Patched(p) => {
                if y <= p.y1 {
                    p.inner.dlog_prime(y)
                } else {
                    -p.s / ((y + p.b) * (y + p.b))
                }
            }
            Family::Custom(c) => match (&c.df, &c.d2f) {
                (Some(df), Some(d2f)) => {
                    let w = (c.f)(y);
                    let d = df(y);
                    d2f(y) / w - (d / w) * (d / w)
                }
                _ => {
                    let this = self.clone();
                    central_difference(&move |x| this.dlog(x), y)
                }
            },
        }
    }

    pub fn derivative(&self, y: f64) -> f64 {
        self.value(y) * self.dlog(y)
    }

    /// Second derivative; available for every family (central differences
    /// back the custom family when no closed form was supplied).
    pub fn second_derivative(&self, y: f64) -> f64 {
        let d = self.dlog(y);
        self.value(y) * (d * d + self.dlog_prime(y))
    }

    /// `w/w'`, negative for decreasing weights.
    pub fn ratio(&self, y: f64) -> f64 {
        1.0 / self.dlog(y)
    }

    /// `(w/w')' = 1 - w w''/(w')^2`, the quantity the regularity condition
    /// bounds from below.
    pub fn ratio_prime(&self, y: f64) -> f64 {
        let d = self.dlog(y);
        -self.dlog_prime(y) / (d * d)
    }

    /// `kappa = w^{1/(n+1)}`.
    pub fn kappa(&self, n: Dimension, y: f64) -> f64 {
        (self.log_value(y) / (n.nf() + 1.0)).exp()
    }

    /// Borichev transform `psi(t) = log w(e^{-t})`.
    pub fn psi(&self, t: f64) -> f64 {
        self.log_value((-t).exp())
    }

    /// `psi'(t) = -x w'(x)/w(x)` at `x = e^{-t}`.
    pub fn psi_prime(&self, t: f64) -> f64 {
        let x = (-t).exp();
        -x * self.dlog(x)
    }

    /// `psi''(t) = x^2 w''/w + x w'/w - (x w'/w)^2` at `x = e^{-t}`.
    pub fn psi_second(&self, t: f64) -> f64 {
        let x = (-t).exp();
        let d = self.dlog(x);
        let curv = d * d + self.dlog_prime(x);
        x * x * curv + x * d - (x * d) * (x * d)
    }

    fn require_decreasing(&self, y: f64) -> Result<(), WeightError> {
        let d = self.dlog(y);
        if !(d < 0.0) {
            return Err(WeightError::Monotonicity { y, dlog: d });
        }
        Ok(())
    }
}

fn log_threshold_g(m: f64, l: f64) -> f64 {
    // G = (m+1) L^m / (1 + L^{m+1})
    (m + 1.0) * l.powf(m) / (1.0 + l.powf(m + 1.0))
}

fn log_threshold_g_prime(m: f64, l: f64) -> f64 {
    // dG/dL = (m+1)(m L^{m-1} - L^{2m}) / (1 + L^{m+1})^2
    let denom = 1.0 + l.powf(m + 1.0);
    let num = if l == 0.0 {
        if m == 1.0 {
            1.0
        } else {
            0.0
        }
    } else {
        m * l.powf(m - 1.0) - l.powf(2.0 * m)
    };
    (m + 1.0) * num / (denom * denom)
}

fn central_difference<F: Fn(f64) -> f64 + ?Sized>(f: &F, y: f64) -> f64 {
    let h = y * 1e-5;
    (f(y + h) - f(y - h)) / (2.0 * h)
}

/// The admissible cap radius `alpha(theta) = -w(theta) / (10 w'(theta))`.
pub fn alpha(weight: &Weight, theta: f64) -> Result<f64, WeightError> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(WeightError::AlphaDomain { theta });
    }
    weight.require_decreasing(theta)?;
    Ok(-1.0 / (ALPHA_COEFF * weight.dlog(theta)))
}

/// Log-spaced grid on `[min, max]`, increasing, with exact endpoints.
pub fn log_grid(min: f64, max: f64, points: usize) -> Vec<f64> {
    assert!(min > 0.0 && max > min && points >= 2);
    let (l0, l1) = (min.ln(), max.ln());
    let mut grid: Vec<f64> = (0..points)
        .map(|i| {
            let frac = i as f64 / (points - 1) as f64;
            (l0 + (l1 - l0) * frac).exp()
        })
        .collect();
    grid[0] = min;
    *grid.last_mut().unwrap() = max;
    grid
}

/// Outcome of the boundary-growth integral `I_0 = ∫_0^1 (w(t)/t)^{1/(n+1)} dt`.
#[derive(Clone, Copy, Debug, Serialize)]
#[serde(tag = "kind", content = "value")]
pub enum RipponIntegral {
    Finite(f64),
    Divergent,
}

impl RipponIntegral {
    pub fn finite(&self) -> Option<f64> {
        match self {
            RipponIntegral::Finite(v) => Some(*v),
            RipponIntegral::Divergent => None,
        }
    }
}

/// `I_0 = ∫_0^1 (w(t)/t)^{1/(n+1)} dt` with endpoint grading, or a
/// divergence verdict.
pub fn rippon_integral(n: Dimension, weight: &Weight) -> Result<RipponIntegral, WeightError> {
    let cfg = QuadConfig {
        rel_tol: 1e-10,
        ..QuadConfig::default()
    };
    let exponent = 1.0 / (n.nf() + 1.0);
    let integrand = |t: f64| ((weight.log_value(t) - t.ln()) * exponent).exp();
    match integrate_to_zero(integrand, 1.0, &cfg) {
        Ok(ZeroLimit::Finite(r)) => {
            if r.value.is_finite() {
                Ok(RipponIntegral::Finite(r.value))
            } else {
                Ok(RipponIntegral::Divergent)
            }
        }
        Ok(ZeroLimit::Divergent { .. }) => Ok(RipponIntegral::Divergent),
        // Overflowing integrand values already certify divergence.
        Err(QuadError::NonFinite { .. }) => Ok(RipponIntegral::Divergent),
        Err(e) => Err(WeightError::Quadrature(e)),
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct PolyGrowthEstimate {
    /// Upper envelope `N` of `-y w'/w` on the grid.
    pub n_upper: f64,
    /// Slack `epsilon` in the lower envelope `n + epsilon`.
    pub epsilon: f64,
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "class")]
pub enum BorichevClass {
    /// `psi'` bounded with limit `n + epsilon > n` and small tail variation.
    Polynomial { limit: f64, tail_variation: f64 },
    /// `psi' -> ∞` with `|psi''| = O(|psi'|^{2 - eps})`.
    Rapid { eps_tilde: f64, fitted_slope: f64 },
    Neither,
}

/// Everything the condition checker measured about a weight.
#[derive(Clone, Debug, Serialize)]
pub struct RegularityReport {
    pub als_pass: bool,
    /// Sampled sup of `|w/w'|` over the smallest decade of the grid.
    pub als_sup_near_zero: f64,
    /// Largest admissible `delta` on the whole grid, clipped to `[0, 1]`.
    pub ar_delta: f64,
    /// Same, restricted to `y <= near_zero_cutoff`. Weights like `e^{1/y}`
    /// satisfy the slope condition only near the boundary; both verdicts are
    /// recorded.
    pub ar_delta_near_zero: f64,
    pub near_zero_cutoff: f64,
    pub poly_growth: Option<PolyGrowthEstimate>,
    pub rippon: RipponIntegral,
    pub borichev: BorichevClass,
    pub grid_min: f64,
    pub grid_max: f64,
    pub grid_points: usize,
}

impl RegularityReport {
    /// The delta the verification pipelines should use: the global value
    /// when positive, otherwise the near-boundary value.
    pub fn effective_delta(&self) -> f64 {
        if self.ar_delta > 0.0 {
            self.ar_delta
        } else {
            self.ar_delta_near_zero
        }
    }
}

/// Check every regularity-condition family on the given grid.
pub fn check_conditions(
    n: Dimension,
    weight: &Weight,
    grid: &[f64],
) -> Result<RegularityReport, WeightError> {
    if grid.len() < 50 {
        return Err(WeightError::GridTooCoarse { points: grid.len() });
    }
    for &y in grid {
        if !(y > 0.0 && y <= 1.0) {
            return Err(WeightError::GridRange { y });
        }
        weight.require_decreasing(y)?;
    }
    let grid_min = grid.iter().copied().fold(f64::INFINITY, f64::min);
    let grid_max = grid.iter().copied().fold(0.0f64, f64::max);

    // Custom weights backed by nested finite differences get a noise
    // estimate for (w/w')'; reject when the grid cannot resolve it.
    if let Family::Custom(c) = &weight.family {
        if c.d2f.is_none() {
            let y = grid_min;
            let r = weight.ratio(y);
            let noise = 4.0 * f64::EPSILON * (r / y) * (r / y) / (1e-5 * 1e-5);
            if noise.abs() > 1e-2 {
                return Err(WeightError::DerivativeNoise { noise });
            }
        }
    }

    let als_sup_near_zero = grid
        .iter()
        .filter(|&&y| y <= grid_min * 10.0)
        .map(|&y| weight.ratio(y).abs())
        .fold(0.0f64, f64::max);
    let als_pass = als_sup_near_zero <= 0.05;

    let min_rp_global = grid
        .iter()
        .map(|&y| weight.ratio_prime(y))
        .fold(f64::INFINITY, f64::min);
    let near_zero_cutoff = 0.1;
    let min_rp_near = grid
        .iter()
        .filter(|&&y| y <= near_zero_cutoff)
        .map(|&y| weight.ratio_prime(y))
        .fold(f64::INFINITY, f64::min);
    let clamp01 = |x: f64| x.clamp(0.0, 1.0);
    let ar_delta = clamp01(1.0 + n.nf() * min_rp_global);
    let ar_delta_near_zero = clamp01(1.0 + n.nf() * min_rp_near);

    let qs: Vec<f64> = grid.iter().map(|&y| -y * weight.dlog(y)).collect();
    let q_max = qs.iter().copied().fold(0.0f64, f64::max);
    let q_min = qs.iter().copied().fold(f64::INFINITY, f64::min);
    let poly_growth = if q_max.is_finite() && q_max < 1e4 && q_min > n.nf() {
        Some(PolyGrowthEstimate {
            n_upper: q_max,
            epsilon: q_min - n.nf(),
        })
    } else {
        None
    };

    let rippon = rippon_integral(n, weight)?;
    let borichev = classify_borichev(n, weight);

    Ok(RegularityReport {
        als_pass,
        als_sup_near_zero,
        ar_delta,
        ar_delta_near_zero,
        near_zero_cutoff,
        poly_growth,
        rippon,
        borichev,
        grid_min,
        grid_max,
        grid_points: grid.len(),
    })
}

/// Classify the weight against the two boundary-growth condition families
/// expressed through `psi(t) = log w(e^{-t})`, sampled on `t in [5, 25]`.
fn classify_borichev(n: Dimension, weight: &Weight) -> BorichevClass {
    const SLOPE_MARGIN: f64 = 0.05;
    let ts: Vec<f64> = (0..=200).map(|i| 5.0 + 20.0 * i as f64 / 200.0).collect();
    let dpsi: Vec<f64> = ts.iter().map(|&t| weight.psi_prime(t)).collect();
    let tail = &dpsi[dpsi.len() - 40..];
    let tail_variation: f64 = tail.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    // Extrapolate the limit assuming psi' ~ L + c/t, which covers both the
    // pure-power and log-corrected families; a plain tail mean mistakes the
    // threshold weight's slow 1/t approach for a limit above n.
    let window = |range: std::ops::Range<usize>| -> (f64, f64) {
        let m = range.len() as f64;
        let mean_t = range.clone().map(|i| ts[i]).sum::<f64>() / m;
        let mean_p = range.map(|i| dpsi[i]).sum::<f64>() / m;
        (mean_t, mean_p)
    };
    let (t1, p1) = window(140..170);
    let (t2, p2) = window(170..200);
    let c_fit = (p1 - p2) / (1.0 / t1 - 1.0 / t2);
    let tail_mean = p2 - c_fit / t2;

    let grows = dpsi.last().unwrap() > &(dpsi.first().unwrap() * 3.0)
        && *dpsi.last().unwrap() > 10.0 * n.nf();
    if grows {
        // Least-squares slope of log |psi''| against log |psi'|.
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for &t in &ts {
            let p1 = weight.psi_prime(t).abs();
            let p2 = weight.psi_second(t).abs();
            if p1 > 0.0 && p2 > 0.0 && p1.is_finite() && p2.is_finite() {
                xs.push(p1.ln());
                ys.push(p2.ln());
            }
        }
        if xs.len() > 10 {
            let slope = least_squares_slope(&xs, &ys);
            if slope <= 2.0 - SLOPE_MARGIN {
                return BorichevClass::Rapid {
                    eps_tilde: 2.0 - slope,
                    fitted_slope: slope,
                };
            }
        }
        return BorichevClass::Neither;
    }

    if tail_mean.is_finite()
        && tail_mean > n.nf() + 1e-3
        && tail_variation <= 0.05 * (1.0 + tail_mean.abs())
    {
        return BorichevClass::Polynomial {
            limit: tail_mean,
            tail_variation,
        };
    }
    BorichevClass::Neither
}

/// Least-squares slope of `ys` against `xs`.
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let nn = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / nn;
    let my = ys.iter().sum::<f64>() / nn;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    num / den
}

/// Record of the doubling check `w(theta - 2 alpha) <= 2 w(theta)`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DoublingRecord {
    pub alpha: f64,
    pub pass_quarter: bool,
    pub pass_doubling: bool,
    /// `w(theta - 2 alpha) / w(theta)`, computed from log-values.
    pub ratio: f64,
}

pub fn verify_lemma_doubling(weight: &Weight, theta: f64) -> Result<DoublingRecord, WeightError> {
    if !(theta > 0.0 && theta <= 0.5) {
        return Err(WeightError::AlphaDomain { theta });
    }
    let a = alpha(weight, theta)?;
    let shifted = theta - 2.0 * a;
    if shifted <= 0.0 {
        return Err(WeightError::DoublingDomain {
            theta,
            alpha: a,
            shifted,
        });
    }
    let ratio = (weight.log_value(shifted) - weight.log_value(theta)).exp();
    Ok(DoublingRecord {
        alpha: a,
        pass_quarter: a <= theta / 4.0,
        pass_doubling: ratio <= 2.0,
        ratio,
    })
}

/// Record of the weighted-integral check: both sides are reported in units
/// of `w(theta)^{1/(n+1)}` so that rapidly growing weights stay finite.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct IntegralBoundRecord {
    /// `lhs / w(theta)^{1/(n+1)}`
    pub lhs_scaled: f64,
    /// `rhs / w(theta)^{1/(n+1)}`
    pub rhs_scaled: f64,
    pub pass: bool,
    /// `rhs / lhs`
    pub slack: f64,
    pub alpha: f64,
    pub delta: f64,
}

/// Verify `∫_0^1 (w(y(1-theta)+theta)/y)^{1/(n+1)} dy <=
/// ((n+1)/n + 40(n+1)/delta) w(theta)^{1/(n+1)} alpha(theta)^{n/(n+1)}`.
pub fn verify_weighted_integral_bound(
    n: Dimension,
    weight: &Weight,
    theta: f64,
    delta: f64,
) -> Result<IntegralBoundRecord, WeightError> {
    if !(theta > 0.0 && theta <= 0.5) {
        return Err(WeightError::AlphaDomain { theta });
    }
    if !(delta > 0.0) {
        return Err(WeightError::InvalidParameter {
            name: "delta",
            value: delta,
        });
    }
    let a = alpha(weight, theta)?;
    let np1 = n.nf() + 1.0;
    let log_w_theta = weight.log_value(theta);
    let integrand = |y: f64| {
        let arg = y * (1.0 - theta) + theta;
        ((weight.log_value(arg) - log_w_theta - y.ln()) / np1).exp()
    };
    let cfg = QuadConfig::default();
    let lhs_scaled = match integrate_to_zero(integrand, 1.0, &cfg)? {
        ZeroLimit::Finite(r) => r.value,
        ZeroLimit::Divergent { .. } => {
            // The integrand is bounded by y^{-1/(n+1)} times a constant, so
            // divergence can only be a misclassification; treat as failure.
            f64::INFINITY
        }
    };
    let rhs_scaled = (np1 / n.nf() + 40.0 * np1 / delta) * a.powf(n.nf() / np1);
    Ok(IntegralBoundRecord {
        lhs_scaled,
        rhs_scaled,
        pass: lhs_scaled <= rhs_scaled,
        slack: rhs_scaled / lhs_scaled,
        alpha: a,
        delta,
    })
}

/// Patch a weight that is regular only near the boundary into one regular on
/// all of `(0, 1]`: keep `A w` on `(0, y1]` and continue with `c (y + b)^s`,
/// matching value and first two derivatives at `y1` and renormalizing so the
/// result is 1 at `y = 1`.
pub fn patch_weight(weight: &Weight, y0: f64) -> Result<Weight, WeightError> {
    if !(y0 > 0.0 && y0 < 1.0) {
        return Err(WeightError::Domain { y: y0 });
    }
    // Find a matching point with (w/w')' < 0 at or below y0.
    let mut y1 = y0;
    let mut found = false;
    for _ in 0..60 {
        weight.require_decreasing(y1)?;
        if weight.ratio_prime(y1) < 0.0 {
            found = true;
            break;
        }
        y1 *= 0.9;
    }
    if !found {
        return Err(WeightError::PatchNotAdmissible { y0 });
    }
    let r1 = weight.ratio(y1); // w/w'
    let r2 = weight.derivative(y1) / weight.second_derivative(y1); // w'/w''
    let denom = r2 - r1;
    if denom == 0.0 || !denom.is_finite() {
        return Err(WeightError::PatchSingular { y1 });
    }
    let s = r2 / denom;
    let b = s * r1 - y1;
    if !(s < 0.0) || b <= -y1 {
        return Err(WeightError::PatchSingular { y1 });
    }
    let c = (1.0 + b).powf(-s);
    let inner_scale = c * (y1 + b).powf(s) / weight.value(y1);
    let descriptor = format!("patched({}; y1={y1:.6e})", weight.descriptor());
    Ok(Weight {
        family: Family::Patched(Box::new(PatchedWeight {
            inner: weight.clone(),
            y1,
            inner_scale,
            c,
            b,
            s,
        })),
        scale: 1.0,
        descriptor,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn dim(n: u32) -> Dimension {
        Dimension::new(n).unwrap()
    }

    #[test]
    fn alpha_closed_forms() {
        let w = Weight::power(3.0).unwrap();
        assert_relative_eq!(alpha(&w, 0.3).unwrap(), 0.3 / 30.0, max_relative = 1e-14);
        let e = Weight::exp_inv(1.0).unwrap();
        assert_relative_eq!(alpha(&e, 0.2).unwrap(), 0.2 * 0.2 / 10.0, max_relative = 1e-14);
        // y^{-2n} at n = 1, theta = 0.2 -> theta/(10*2) = 0.01
        let w2 = Weight::power(2.0).unwrap();
        assert_relative_eq!(alpha(&w2, 0.2).unwrap(), 0.01, max_relative = 1e-14);
    }

    #[test]
    fn alpha_rejects_non_decreasing() {
        let w = Weight::power(0.0).unwrap();
        assert!(matches!(
            alpha(&w, 0.3),
            Err(WeightError::Monotonicity { .. })
        ));
    }

    #[test]
    fn closed_form_derivatives_match_finite_differences() {
        let weights = [
            Weight::power(2.5).unwrap(),
            Weight::power_log(3.0, 2.0).unwrap(),
            Weight::exp_inv(1.0).unwrap(),
            Weight::log_threshold(dim(2)),
        ];
        for w in &weights {
            for &y in &[0.03, 0.1, 0.4, 0.9] {
                let h = y * 1e-6;
                let fd1 = (w.value(y + h) - w.value(y - h)) / (2.0 * h);
                assert_relative_eq!(w.derivative(y), fd1, max_relative = 1e-7);
                let fd2 = (w.value(y + h) - 2.0 * w.value(y) + w.value(y - h)) / (h * h);
                assert_relative_eq!(w.second_derivative(y), fd2, max_relative = 1e-3);
            }
        }
    }

    #[test]
    fn power_weight_delta_is_exact() {
        let n = dim(1);
        let grid = log_grid(1e-6, 1.0, 200);
        let report = check_conditions(n, &Weight::power(4.0).unwrap(), &grid).unwrap();
        assert_relative_eq!(report.ar_delta, 1.0 - 1.0 / 4.0, max_relative = 1e-12);
        assert!(report.als_pass);

        // At the threshold p = n the condition fails.
        let report0 = check_conditions(n, &Weight::power(1.0).unwrap(), &grid).unwrap();
        assert_abs_diff_eq!(report0.ar_delta, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn exp_weight_near_zero_delta() {
        // (w/w')' = -2y: fails globally but approaches 1 toward the boundary.
        let n = dim(1);
        let grid = log_grid(1e-6, 1.0, 300);
        let w = Weight::exp_inv(1.0).unwrap();
        let report = check_conditions(n, &w, &grid).unwrap();
        assert!(report.als_pass);
        assert_abs_diff_eq!(report.ar_delta, 0.0, epsilon = 1e-12);
        // The binding grid point is the largest one at or below the cutoff.
        let y_star = grid
            .iter()
            .copied()
            .filter(|&y| y <= report.near_zero_cutoff)
            .fold(0.0f64, f64::max);
        assert_relative_eq!(
            report.ar_delta_near_zero,
            1.0 - 2.0 * y_star,
            max_relative = 1e-12
        );
        assert!(report.effective_delta() > 0.0);
    }

    #[test]
    fn rippon_closed_forms_and_divergence() {
        for n in [1u32, 2, 3] {
            let nd = dim(n);
            for a in [0.0, n as f64 / 2.0] {
                let w = Weight::power(a).unwrap();
                let got = rippon_integral(nd, &w).unwrap().finite().unwrap();
                let expected = (n as f64 + 1.0) / (n as f64 - a);
                assert_relative_eq!(got, expected, max_relative = 1e-6);
            }
            let w = Weight::power(n as f64).unwrap();
            assert!(rippon_integral(nd, &w).unwrap().finite().is_none());
        }
    }

    #[test]
    fn rippon_exp_weight_diverges() {
        assert!(rippon_integral(dim(1), &Weight::exp_inv(1.0).unwrap())
            .unwrap()
            .finite()
            .is_none());
    }

    #[test]
    fn rippon_is_monotone_in_the_weight() {
        let n = dim(2);
        let w1 = Weight::power(0.5).unwrap();
        let w2 = Weight::power(1.0).unwrap(); // pointwise larger on (0,1]
        let i1 = rippon_integral(n, &w1).unwrap().finite().unwrap();
        let i2 = rippon_integral(n, &w2).unwrap().finite().unwrap();
        assert!(i1 <= i2 + 1e-10);
    }

    #[test]
    fn doubling_reference_values() {
        // w = y^{-2}, theta = 0.4: alpha = 0.02, ratio = (0.4/0.36)^2.
        let rec = verify_lemma_doubling(&Weight::power(2.0).unwrap(), 0.4).unwrap();
        assert_relative_eq!(rec.alpha, 0.02, max_relative = 1e-13);
        assert_relative_eq!(rec.ratio, (0.4f64 / 0.36).powi(2), max_relative = 1e-12);
        assert!((rec.ratio - 1.2346).abs() < 1e-3);
        assert!(rec.pass_quarter && rec.pass_doubling);

        // exp weight at theta = 0.1: alpha = 1e-3, ratio = exp(1/0.098 - 10).
        let rec = verify_lemma_doubling(&Weight::exp_inv(1.0).unwrap(), 0.1).unwrap();
        assert_relative_eq!(rec.alpha, 1e-3, max_relative = 1e-13);
        assert_relative_eq!(
            rec.ratio,
            (1.0f64 / 0.098 - 10.0).exp(),
            max_relative = 1e-10
        );
        assert!((rec.ratio - 1.226).abs() < 1e-3);
        assert!(rec.pass_doubling);
    }

    #[test]
    fn quarter_bound_holds_for_all_power_weights() {
        for p in [1.0, 2.0, 5.0, 20.0] {
            let w = Weight::power(p).unwrap();
            for theta in [1e-3, 0.1, 0.5] {
                let a = alpha(&w, theta).unwrap();
                assert!(a <= theta / 4.0);
            }
        }
    }

    #[test]
    fn weighted_integral_bound_passes_for_regular_weights() {
        for n in [1u32, 2] {
            let nd = dim(n);
            let w = Weight::power(2.0 * n as f64).unwrap();
            let grid = log_grid(1e-6, 1.0, 200);
            let delta = check_conditions(nd, &w, &grid).unwrap().effective_delta();
            for theta in [1e-3, 1e-2, 0.1, 0.5] {
                let rec = verify_weighted_integral_bound(nd, &w, theta, delta).unwrap();
                assert!(rec.pass, "failed at n = {n}, theta = {theta}: {rec:?}");
                assert!(rec.lhs_scaled.is_finite() && rec.lhs_scaled > 0.0);
            }
        }
    }

    #[test]
    fn weighted_integral_bound_exp_weight() {
        let nd = dim(1);
        let w = Weight::exp_inv(1.0).unwrap();
        let grid = log_grid(1e-6, 1.0, 300);
        let delta = check_conditions(nd, &w, &grid)
            .unwrap()
            .effective_delta();
        let rec = verify_weighted_integral_bound(nd, &w, 0.05, delta).unwrap();
        assert!(rec.pass);
        println!("exp weight slack at theta = 0.05: {}", rec.slack);
    }

    #[test]
    fn alpha_slope_bound_from_regularity() {
        // alpha'(theta) <= (1 - delta)/(10 n) for weights satisfying the
        // slope condition; sampled by central differences.
        let n = dim(2);
        let w = Weight::power(4.0).unwrap();
        let grid = log_grid(1e-5, 0.9, 100);
        let delta = check_conditions(n, &w, &grid).unwrap().ar_delta;
        for &theta in grid.iter().filter(|&&t| t < 0.5) {
            let h = theta * 1e-6;
            let da = (alpha(&w, theta + h).unwrap() - alpha(&w, theta - h).unwrap()) / (2.0 * h);
            assert!(da <= (1.0 - delta) / (10.0 * n.nf()) + 1e-8);
        }
    }

    #[test]
    fn growth_threshold_bound_via_rippon() {
        // For decreasing w with finite I0: w(y) <= I0^{n+1} y^{-n}.
        let n = dim(2);
        let w = Weight::power(1.0).unwrap();
        let i0 = rippon_integral(n, &w).unwrap().finite().unwrap();
        for &y in &[1e-4, 1e-2, 0.3, 1.0] {
            assert!(w.value(y) <= i0.powi(3) * y.powi(-2) * (1.0 + 1e-9));
        }
    }

    #[test]
    fn borichev_classification() {
        let n = dim(1);
        match classify_borichev(n, &Weight::power(3.0).unwrap()) {
            BorichevClass::Polynomial { limit, .. } => {
                assert_relative_eq!(limit, 3.0, max_relative = 1e-9)
            }
            other => panic!("power weight should classify polynomial, got {other:?}"),
        }
        match classify_borichev(n, &Weight::exp_inv(1.0).unwrap()) {
            BorichevClass::Rapid { fitted_slope, .. } => {
                assert!((fitted_slope - 1.0).abs() < 0.05)
            }
            other => panic!("exp weight should classify rapid, got {other:?}"),
        }
        match classify_borichev(n, &Weight::log_threshold(n)) {
            BorichevClass::Neither => {}
            other => panic!("threshold weight should classify neither, got {other:?}"),
        }
    }

    #[test]
    fn patch_of_global_power_law_is_identity() {
        let w = Weight::power(3.0).unwrap();
        let patched = patch_weight(&w, 0.5).unwrap();
        for &y in &[1e-4, 0.2, 0.7, 1.0] {
            assert_relative_eq!(patched.value(y), w.value(y), max_relative = 1e-10);
        }
    }

    #[test]
    fn patch_is_c2_and_regular() {
        let n = dim(1);
        let w = Weight::power(2.0).unwrap();
        let patched = patch_weight(&w, 0.5).unwrap();
        // One-sided limits across the matching point agree (the step below
        // is a few ulps, so the drift term w' * eps is negligible).
        let y1 = 0.5;
        let eps = 8.0 * f64::EPSILON * y1;
        assert_abs_diff_eq!(
            patched.value(y1),
            patched.value(y1 + eps),
            epsilon = 1e-10 * patched.value(y1)
        );
        assert_relative_eq!(patched.value(1.0), 1.0, max_relative = 1e-12);
        let grid = log_grid(1e-6, 1.0, 200);
        let report = check_conditions(n, &patched, &grid).unwrap();
        assert!(report.ar_delta >= 0.5 - 1e-6);
    }

    #[test]
    fn patch_repairs_exp_weight_global_regularity() {
        // exp(1/y) satisfies the slope condition only near the boundary;
        // patched with a power-law tail at y0 = 0.1 (where the matched
        // exponent is s = -1/(2 y1) = -5) it passes globally.
        let n = dim(1);
        let w = Weight::exp_inv(1.0).unwrap();
        let grid = log_grid(1e-6, 1.0, 300);
        assert_eq!(check_conditions(n, &w, &grid).unwrap().ar_delta, 0.0);
        let patched = patch_weight(&w, 0.1).unwrap();
        let report = check_conditions(n, &patched, &grid).unwrap();
        assert!(report.als_pass);
        assert!(
            report.ar_delta >= 0.8 - 1e-6,
            "patched delta {}",
            report.ar_delta
        );
        // Inner region still the (scaled) original weight.
        assert_relative_eq!(
            patched.log_value(1e-3) - patched.log_value(2e-3),
            w.log_ratio(1e-3, 2e-3),
            max_relative = 1e-12
        );
    }

    #[test]
    fn parse_grammar() {
        let w = Weight::parse("family=power p=4").unwrap();
        assert_relative_eq!(w.value(0.5), 16.0, max_relative = 1e-12);
        assert!(Weight::parse("family=power").is_err());
        assert!(Weight::parse("p=4").is_err());
        assert!(Weight::parse("family=power p=abc").is_err());
        let e = Weight::parse("family=exp_inv a=1").unwrap();
        assert_relative_eq!(e.value(1.0), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn normalization_at_one() {
        for w in [
            Weight::power(2.0).unwrap(),
            Weight::power_log(3.0, 2.0).unwrap(),
            Weight::exp_inv(2.0).unwrap(),
            Weight::log_threshold(dim(3)),
        ] {
            assert_relative_eq!(w.value(1.0), 1.0, max_relative = 1e-12);
            assert!(w.log_value(1e-6) > 1e3f64.ln());
        }
    }

    #[test]
    fn custom_weight_with_difference_fallback() {
        let w = Weight::custom(|y: f64| y.powf(-3.0), None, None).unwrap();
        assert_relative_eq!(w.dlog(0.2), -3.0 / 0.2, max_relative = 1e-6);
        assert_relative_eq!(w.ratio_prime(0.3), -1.0 / 3.0, max_relative = 1e-4);
        let grid = log_grid(1e-4, 1.0, 80);
        let report = check_conditions(dim(1), &w, &grid).unwrap();
        assert!((report.ar_delta - (1.0 - 1.0 / 3.0)).abs() < 1e-3);
    }
}
