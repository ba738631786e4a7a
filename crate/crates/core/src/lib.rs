//! Numerical toolkit for two-sided growth estimates of harmonic functions in
//! the unit ball of `R^{n+1}`.
//!
//! A harmonic function that vanishes at the center and is bounded *above* by
//! a decreasing radial weight `w(1 - |z|)` is, for regular enough weights,
//! automatically bounded *below* by a multiple of the same weight. This
//! crate implements every constructive object in that circle of ideas at
//! desk scale:
//!
//! * [`ball`] - Poisson kernel, cap-averaged kernel, and axially symmetric
//!   harmonic extensions;
//! * [`weight`] - weight families and the regularity calculus (slope
//!   conditions, doubling, weighted integrals, boundary-growth classes);
//! * [`surface`] - the auxiliary surface and harmonic majorant used to bound
//!   cap averages;
//! * [`verifier`] - the Harnack averaging stage and end-to-end pipelines for
//!   the three theorem shapes;
//! * [`extremal`] - the sharpness example built from a log-polynomial ansatz
//!   and a cascade of singular ODEs.
//!
//! Supporting numerics (adaptive Gauss–Kronrod quadrature, monotone and
//! quintic Hermite interpolation, bracketed root finding, a Cash–Karp
//! stepper, complete elliptic integrals) live in their own small modules.

pub mod ball;
pub mod elliptic;
pub mod extremal;
pub mod interp;
pub mod ode;
pub mod quad;
pub mod rng;
pub mod roots;
pub mod surface;
pub mod verifier;
pub mod weight;

pub use ball::{BallPoint, Dimension};
pub use weight::Weight;
