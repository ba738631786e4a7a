//! Complete elliptic integrals via the arithmetic–geometric mean.
//!
//! Only the second kind is needed here (the azimuthal average of the Poisson
//! kernel in the three-dimensional ball reduces to `E`), but `K` falls out of
//! the same iteration for free.

/// Complete elliptic integrals `K(k)` and `E(k)` for modulus `0 <= k < 1`.
///
/// AGM iteration; converges quadratically, accurate to a few ulps away from
/// `k = 1`. Near `k = 1` the relative error of `E` degrades like `K²·eps`,
/// which is still far below the quadrature tolerances used in this crate.
pub fn complete_elliptic_ke(k: f64) -> (f64, f64) {
    assert!((0.0..1.0).contains(&k), "modulus out of range: {k}");
    let mut a = 1.0f64;
    let mut b = (1.0 - k * k).sqrt();
    let mut c = k;
    let mut sum = 0.5 * c * c;
    let mut pow2 = 1.0f64;
    for _ in 0..64 {
        if c.abs() <= f64::EPSILON * a {
            break;
        }
        let an = 0.5 * (a + b);
        let bn = (a * b).sqrt();
        c = 0.5 * (a - b);
        a = an;
        b = bn;
        pow2 *= 2.0;
        sum += 0.5 * pow2 * c * c;
    }
    let big_k = std::f64::consts::FRAC_PI_2 / a;
    let big_e = big_k * (1.0 - sum);
    (big_k, big_e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{integrate, QuadConfig};
    use approx::assert_relative_eq;

    #[test]
    fn matches_defining_integrals() {
        let cfg = QuadConfig::default();
        for &k in &[0.0, 0.1, 0.5, 0.9, 0.99, 0.99999] {
            let (big_k, big_e) = complete_elliptic_ke(k);
            let e_quad = integrate(
                |t: f64| (1.0 - (k * t.sin()).powi(2)).sqrt(),
                0.0,
                std::f64::consts::FRAC_PI_2,
                &cfg,
            )
            .unwrap()
            .value;
            assert_relative_eq!(big_e, e_quad, max_relative = 1e-10);
            if k < 0.99 {
                let k_quad = integrate(
                    |t: f64| 1.0 / (1.0 - (k * t.sin()).powi(2)).sqrt(),
                    0.0,
                    std::f64::consts::FRAC_PI_2,
                    &cfg,
                )
                .unwrap()
                .value;
                assert_relative_eq!(big_k, k_quad, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn known_values() {
        let (big_k, big_e) = complete_elliptic_ke(0.0);
        assert_relative_eq!(big_k, std::f64::consts::FRAC_PI_2, max_relative = 1e-15);
        assert_relative_eq!(big_e, std::f64::consts::FRAC_PI_2, max_relative = 1e-15);
    }
}
