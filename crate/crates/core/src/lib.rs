//! Numerical laboratory for the dual variational treatment of the critical
//! nonlinear Helmholtz equation `-Δu - u = Q(x)|u|^{2*-2}u` on ℝ^N.
//!
//! The crate is organized around the objects that drive the analysis:
//!
//! - [`specfun`]: gamma, Bessel functions of the second kind `Y_ν`, their
//!   first zeros and the normalized profiles `η_ν(t) = -c_ν t^ν Y_ν(t)`.
//! - [`fundsol`]: the radial fundamental solutions `Ψ` (Helmholtz, real
//!   standing-wave part) and `Λ` (Newton kernel), the cancellation-free
//!   difference `Ψ - Λ` and empirical certificates for its two-sided bounds.
//! - [`radialops`]: panel Gauss quadrature on radial grids, `L^p` norms,
//!   Newton potentials and kernel quadratic forms via angular averaging.
//! - [`dualvar`]: the Birman-Schwinger operator `A_Q`, the dual functional
//!   `J_Q`, the projection `t_v`, Rayleigh-quotient mountain-pass bounds, the
//!   Sobolev constant `S` and the threshold level `L_Q*`.
//! - [`instanton`]: Aubin-Talenti instantons, their dual profiles, cutoff
//!   families and the four-term bilinear decomposition that certifies the
//!   strict gap `L_Q < L_Q*` for `N ≥ 4`.
//! - [`solver`]: resolvent application (radial quadrature and Cartesian FFT
//!   backends), a damped normalized fixed-point iteration for candidate dual
//!   ground states, far-field diagnostics and the `N = 3` comparison probe.

pub mod dualvar;
pub mod error;
pub mod fundsol;
pub mod instanton;
pub mod radialops;
pub mod report;
pub mod solver;
pub mod specfun;

pub use error::{Error, Result};
pub use fundsol::DimensionContext;
