//! Piecewise-polynomial interpolation.
//!
//! Two flavours are used across the crate:
//!
//! * [`Pchip`] - monotone piecewise cubics (Fritsch–Carlson slopes). Used for
//!   grid-backed boundary profiles and for the inverse of the surface graph,
//!   where overshoot would violate monotonicity invariants.
//! * [`QuinticHermite`] - two-point quintic Hermite from `(f, f', f'')`
//!   samples. Used for ODE solution grids where C² continuity matters
//!   because finite-difference oracles later second-difference the values.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum InterpError {
    #[error("need at least {needed} sample points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("abscissae must be strictly increasing (violation near index {index})")]
    NotIncreasing { index: usize },
    #[error("non-finite sample at index {index}")]
    NonFinite { index: usize },
}

fn locate(xs: &[f64], x: f64) -> usize {
    // Index i with xs[i] <= x < xs[i+1], clamped to valid segments.
    match xs.binary_search_by(|p| p.total_cmp(&x)) {
        Ok(i) => i.min(xs.len() - 2),
        Err(i) => i.saturating_sub(1).min(xs.len() - 2),
    }
}

fn validate(xs: &[f64], ys: &[f64], needed: usize) -> Result<(), InterpError> {
    if xs.len() < needed || xs.len() != ys.len() {
        return Err(InterpError::TooFewPoints {
            needed,
            got: xs.len().min(ys.len()),
        });
    }
    for i in 0..xs.len() {
        if !xs[i].is_finite() || !ys[i].is_finite() {
            return Err(InterpError::NonFinite { index: i });
        }
        if i > 0 && xs[i] <= xs[i - 1] {
            return Err(InterpError::NotIncreasing { index: i });
        }
    }
    Ok(())
}

/// Monotone piecewise-cubic interpolant (Fritsch–Carlson).
#[derive(Clone, Debug)]
pub struct Pchip {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl Pchip {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self, InterpError> {
        validate(&xs, &ys, 2)?;
        let n = xs.len();
        let mut deltas = Vec::with_capacity(n - 1);
        for i in 0..n - 1 {
            deltas.push((ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]));
        }
        let mut slopes = vec![0.0; n];
        slopes[0] = deltas[0];
        slopes[n - 1] = deltas[n - 2];
        for i in 1..n - 1 {
            let (d0, d1) = (deltas[i - 1], deltas[i]);
            if d0 * d1 <= 0.0 {
                slopes[i] = 0.0;
            } else {
                // Weighted harmonic mean keeps the interpolant monotone.
                let h0 = xs[i] - xs[i - 1];
                let h1 = xs[i + 1] - xs[i];
                let w0 = 2.0 * h1 + h0;
                let w1 = h1 + 2.0 * h0;
                slopes[i] = (w0 + w1) / (w0 / d0 + w1 / d1);
            }
        }
        // Endpoint slope limiting (Fritsch–Carlson three-point rule).
        for (edge, seg) in [(0usize, 0usize), (n - 1, n - 2)] {
            let d = deltas[seg];
            if d == 0.0 || slopes[edge] * d < 0.0 {
                slopes[edge] = 0.0;
            } else if slopes[edge].abs() > 3.0 * d.abs() {
                slopes[edge] = 3.0 * d;
            }
        }
        Ok(Pchip { xs, ys, slopes })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], *self.xs.last().unwrap())
    }

    /// Evaluate at `x`; arguments are clamped to the domain.
    pub fn eval(&self, x: f64) -> f64 {
        let (lo, hi) = self.domain();
        let x = x.clamp(lo, hi);
        let i = locate(&self.xs, x);
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let (y0, y1) = (self.ys[i], self.ys[i + 1]);
        let (m0, m1) = (self.slopes[i] * h, self.slopes[i + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        y0 * (2.0 * t3 - 3.0 * t2 + 1.0)
            + m0 * (t3 - 2.0 * t2 + t)
            + y1 * (-2.0 * t3 + 3.0 * t2)
            + m1 * (t3 - t2)
    }
}

/// Piecewise quintic Hermite interpolant from `(x, f, f', f'')` samples.
#[derive(Clone, Debug)]
pub struct QuinticHermite {
    xs: Vec<f64>,
    f: Vec<f64>,
    df: Vec<f64>,
    d2f: Vec<f64>,
}

impl QuinticHermite {
    pub fn new(xs: Vec<f64>, f: Vec<f64>, df: Vec<f64>, d2f: Vec<f64>) -> Result<Self, InterpError> {
        validate(&xs, &f, 2)?;
        if df.len() != xs.len() || d2f.len() != xs.len() {
            return Err(InterpError::TooFewPoints {
                needed: xs.len(),
                got: df.len().min(d2f.len()),
            });
        }
        Ok(QuinticHermite { xs, f, df, d2f })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], *self.xs.last().unwrap())
    }

    /// Borrow the raw `(x, f, f', f'')` samples.
    pub fn raw_data(&self) -> (&[f64], &[f64], &[f64], &[f64]) {
        (&self.xs, &self.f, &self.df, &self.d2f)
    }

    fn segment(&self, x: f64) -> (usize, f64, f64) {
        let (lo, hi) = self.domain();
        let x = x.clamp(lo, hi);
        let i = locate(&self.xs, x);
        let h = self.xs[i + 1] - self.xs[i];
        ((i), h, (x - self.xs[i]) / h)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let (i, h, t) = self.segment(x);
        let (f0, f1) = (self.f[i], self.f[i + 1]);
        let (g0, g1) = (self.df[i] * h, self.df[i + 1] * h);
        let (s0, s1) = (self.d2f[i] * h * h, self.d2f[i + 1] * h * h);
        // Quintic Hermite basis on [0, 1].
        let t2 = t * t;
        let t3 = t2 * t;
        let t4 = t3 * t;
        let t5 = t4 * t;
        let h00 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
        let h10 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
        let h20 = 0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5);
        let h01 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
        let h11 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
        let h21 = 0.5 * (t3 - 2.0 * t4 + t5);
        f0 * h00 + g0 * h10 + s0 * h20 + f1 * h01 + g1 * h11 + s1 * h21
    }

    pub fn eval_derivative(&self, x: f64) -> f64 {
        let (i, h, t) = self.segment(x);
        let (f0, f1) = (self.f[i], self.f[i + 1]);
        let (g0, g1) = (self.df[i] * h, self.df[i + 1] * h);
        let (s0, s1) = (self.d2f[i] * h * h, self.d2f[i + 1] * h * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let t4 = t3 * t;
        let d00 = -30.0 * t2 + 60.0 * t3 - 30.0 * t4;
        let d10 = 1.0 - 18.0 * t2 + 32.0 * t3 - 15.0 * t4;
        let d20 = 0.5 * (2.0 * t - 9.0 * t2 + 12.0 * t3 - 5.0 * t4);
        let d01 = 30.0 * t2 - 60.0 * t3 + 30.0 * t4;
        let d11 = -12.0 * t2 + 28.0 * t3 - 15.0 * t4;
        let d21 = 0.5 * (3.0 * t2 - 8.0 * t3 + 5.0 * t4);
        (f0 * d00 + g0 * d10 + s0 * d20 + f1 * d01 + g1 * d11 + s1 * d21) / h
    }
}
