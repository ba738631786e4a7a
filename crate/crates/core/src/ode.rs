//! Adaptive Runge–Kutta integration for second-order linear ODEs.
//!
//! Cash–Karp embedded 4(5) pair on the first-order system `(f, f')`. The
//! singular-ODE machinery only integrates over regions where the
//! coefficients are regular (series take over near the singular point), so a
//! plain adaptive stepper with tight tolerances is enough.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum OdeError {
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("output nodes must move monotonically away from the start t0 = {t0}")]
    BadNodes { t0: f64 },
}

const SAFETY: f64 = 0.9;
const MIN_SCALE: f64 = 0.2;
const MAX_SCALE: f64 = 5.0;

/// Advance `(f, f')` with `f'' = rhs(t, f, f')` from `t0` to each node in
/// `nodes` (strictly monotone, starting away from `t0` in either direction),
/// returning `(f, f')` at every node.
pub fn integrate_second_order<R>(
    rhs: R,
    t0: f64,
    state0: (f64, f64),
    nodes: &[f64],
    rel_tol: f64,
    abs_tol: f64,
) -> Result<Vec<(f64, f64)>, OdeError>
where
    R: Fn(f64, f64, f64) -> f64,
{
    if nodes.is_empty() {
        return Ok(Vec::new());
    }
    let direction = (nodes[0] - t0).signum();
    if direction == 0.0 {
        return Err(OdeError::BadNodes { t0 });
    }
    for pair in nodes.windows(2) {
        if (pair[1] - pair[0]).signum() != direction {
            return Err(OdeError::BadNodes { t0 });
        }
    }

    let deriv = |t: f64, y: [f64; 2]| [y[1], rhs(t, y[0], y[1])];

    let mut t = t0;
    let mut y = [state0.0, state0.1];
    let mut h = direction * ((nodes[0] - t0).abs().min(1e-3)).max(1e-12);
    let mut out = Vec::with_capacity(nodes.len());

    for &target in nodes {
        while (target - t) * direction > 0.0 {
            if (t + h - target) * direction > 0.0 {
                h = target - t;
            }
            let (y_next, err) = cash_karp_step(&deriv, t, y, h);
            let scale = abs_tol
                + rel_tol * y[0].abs().max(y[1].abs()).max(y_next[0].abs().max(y_next[1].abs()));
            let ratio = err / scale;
            if ratio <= 1.0 {
                t += h;
                y = y_next;
                let grow = if ratio > 0.0 {
                    (SAFETY * ratio.powf(-0.2)).clamp(MIN_SCALE, MAX_SCALE)
                } else {
                    MAX_SCALE
                };
                h *= grow;
            } else {
                h *= (SAFETY * ratio.powf(-0.25)).clamp(MIN_SCALE, 1.0);
                if h.abs() < 1e-15 * t.abs().max(1.0) {
                    return Err(OdeError::StepUnderflow { t, h });
                }
            }
        }
        out.push((y[0], y[1]));
    }
    Ok(out)
}

fn cash_karp_step<D>(deriv: &D, t: f64, y: [f64; 2], h: f64) -> ([f64; 2], f64)
where
    D: Fn(f64, [f64; 2]) -> [f64; 2],
{
    const A: [f64; 6] = [0.0, 0.2, 0.3, 0.6, 1.0, 0.875];
    const B: [[f64; 5]; 6] = [
        [0.0, 0.0, 0.0, 0.0, 0.0],
        [0.2, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0],
        [0.3, -0.9, 1.2, 0.0, 0.0],
        [-11.0 / 54.0, 2.5, -70.0 / 27.0, 35.0 / 27.0, 0.0],
        [
            1631.0 / 55296.0,
            175.0 / 512.0,
            575.0 / 13824.0,
            44275.0 / 110592.0,
            253.0 / 4096.0,
        ],
    ];
    const C5: [f64; 6] = [37.0 / 378.0, 0.0, 250.0 / 621.0, 125.0 / 594.0, 0.0, 512.0 / 1771.0];
    const C4: [f64; 6] = [
        2825.0 / 27648.0,
        0.0,
        18575.0 / 48384.0,
        13525.0 / 55296.0,
        277.0 / 14336.0,
        0.25,
    ];

    let mut k = [[0.0f64; 2]; 6];
    k[0] = deriv(t, y);
    for stage in 1..6 {
        let mut yi = y;
        for j in 0..stage {
            yi[0] += h * B[stage][j] * k[j][0];
            yi[1] += h * B[stage][j] * k[j][1];
        }
        k[stage] = deriv(t + A[stage] * h, yi);
    }
    let mut y5 = y;
    let mut y4 = y;
    for stage in 0..6 {
        y5[0] += h * C5[stage] * k[stage][0];
        y5[1] += h * C5[stage] * k[stage][1];
        y4[0] += h * C4[stage] * k[stage][0];
        y4[1] += h * C4[stage] * k[stage][1];
    }
    let err = ((y5[0] - y4[0]).abs()).max((y5[1] - y4[1]).abs());
    (y5, err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn harmonic_oscillator_forward() {
        // f'' = -f, f(0) = 0, f'(0) = 1 -> sin t.
        let nodes: Vec<f64> = (1..=20).map(|i| i as f64 * 0.3).collect();
        let out =
            integrate_second_order(|_, f, _| -f, 0.0, (0.0, 1.0), &nodes, 1e-12, 1e-14).unwrap();
        for (node, (f, df)) in nodes.iter().zip(&out) {
            assert_relative_eq!(*f, node.sin(), epsilon = 1e-9);
            assert_relative_eq!(*df, node.cos(), epsilon = 1e-9);
        }
    }

    #[test]
    fn integrates_backward() {
        // Same oscillator integrated from t = 3 down to 0.5.
        let nodes: Vec<f64> = (1..=10).map(|i| 3.0 - i as f64 * 0.25).collect();
        let out = integrate_second_order(
            |_, f, _| -f,
            3.0,
            (3.0f64.sin(), 3.0f64.cos()),
            &nodes,
            1e-12,
            1e-14,
        )
        .unwrap();
        for (node, (f, _)) in nodes.iter().zip(&out) {
            assert_relative_eq!(*f, node.sin(), epsilon = 1e-9);
        }
    }

    #[test]
    fn rejects_non_monotone_nodes() {
        let r = integrate_second_order(|_, f, _| -f, 0.0, (0.0, 1.0), &[1.0, 0.5], 1e-9, 1e-12);
        assert!(r.is_err());
    }
}
