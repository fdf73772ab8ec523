//! Radial fundamental solutions on ℝ^N: the real standing-wave Helmholtz
//! kernel `Ψ`, the Newton kernel `Λ`, and the difference `Ψ - Λ` evaluated
//! without cancellation. Includes empirical certificates for the two-sided
//! bounds satisfied by the difference near the origin:
//!
//! - `N ≥ 5`:  κ₁ r^{4-N} ≤ Ψ-Λ ≤ κ₂ r^{4-N}
//! - `N = 4`:  κ₁ |ln r|  ≤ Ψ-Λ ≤ κ₂ |ln r|
//! - `N = 3`:  -κ₁ r ≥ Ψ-Λ ≥ -κ₂ r   (the difference is negative)
//!
//! together with finite-difference checks for the derivative bounds
//! `|∂^α(Ψ-Λ)| ≤ κ₃ r^{4-N-|α|}`.

use crate::error::{Error, Result};
use crate::specfun::{self, Order};
use serde::Serialize;
use std::f64::consts::PI;

/// Spatial dimension with its derived exponents and geometric constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DimensionContext {
    n: u32,
}

impl DimensionContext {
    pub fn new(n: u32) -> Result<Self> {
        if !(3..=8).contains(&n) {
            return Err(Error::domain(format!("dimension N = {n} outside supported range [3, 8]")));
        }
        Ok(DimensionContext { n })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn nf(&self) -> f64 {
        self.n as f64
    }

    /// Critical Sobolev exponent 2* = 2N/(N-2).
    pub fn two_star(&self) -> f64 {
        2.0 * self.nf() / (self.nf() - 2.0)
    }

    /// Conjugate exponent 2⁺ = 2N/(N+2).
    pub fn two_plus(&self) -> f64 {
        2.0 * self.nf() / (self.nf() + 2.0)
    }

    /// Volume of the unit ball, ω_N = 2 π^{N/2} / (N Γ(N/2)).
    pub fn omega_n(&self) -> f64 {
        let nf = self.nf();
        2.0 * PI.powf(nf / 2.0) / (nf * specfun::gamma(nf / 2.0).expect("N/2 > 0"))
    }

    /// Surface measure of the unit sphere, |S^{N-1}| = N ω_N.
    pub fn surface(&self) -> f64 {
        self.nf() * self.omega_n()
    }

    /// Bessel order ν = (N-2)/2 attached to the Helmholtz kernel.
    pub fn order(&self) -> Order {
        Order::from_twice(self.n - 2).expect("(N-2)/2 <= 3 is supported")
    }

    /// Normalization 1/(N(N-2)ω_N) of the Newton kernel.
    pub fn newton_norm(&self) -> f64 {
        1.0 / (self.nf() * (self.nf() - 2.0) * self.omega_n())
    }
}

/// Ψ(r) = -(1/4)(2πr)^{(2-N)/2} Y_{(N-2)/2}(r); for N = 3 the closed form
/// cos r / (4π r).
pub fn psi(ctx: DimensionContext, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::domain(format!("psi requires r > 0, got {r}")));
    }
    if ctx.n() == 3 {
        return Ok(r.cos() / (4.0 * PI * r));
    }
    let nu = ctx.order();
    let y = specfun::bessel_y(nu, r)?;
    Ok(-0.25 * (2.0 * PI * r).powf((2.0 - ctx.nf()) / 2.0) * y)
}

/// Newton kernel Λ(r) = r^{2-N} / (N(N-2)ω_N).
pub fn lambda(ctx: DimensionContext, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::domain(format!("lambda requires r > 0, got {r}")));
    }
    Ok(ctx.newton_norm() * r.powf(2.0 - ctx.nf()))
}

/// Upper end of the window where the difference is evaluated through
/// `η_ν - 1` rather than by direct subtraction.
fn eta_window(ctx: DimensionContext) -> f64 {
    let lower = ctx.order().lower().expect("nu >= 1 for N >= 4");
    (0.9 * specfun::first_zero(lower)).min(1.0)
}

/// Ψ(r) - Λ(r) without forming the两 parts separately for small r:
/// `Λ(r)(η_{(N-2)/2}(r) - 1)` through the cancelled series for N ≥ 4, and
/// `-2 sin²(r/2)/(4π r)` for N = 3. Falls back to direct subtraction above
/// the small-argument window.
pub fn psi_minus_lambda(ctx: DimensionContext, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::domain(format!("psi_minus_lambda requires r > 0, got {r}")));
    }
    if ctx.n() == 3 {
        let s = (0.5 * r).sin();
        return Ok(-2.0 * s * s / (4.0 * PI * r));
    }
    if r < eta_window(ctx) {
        let em1 = specfun::eta_minus_one(ctx.order(), r)?;
        Ok(lambda(ctx, r)? * em1)
    } else {
        Ok(psi(ctx, r)? - lambda(ctx, r)?)
    }
}

/// Comparison weight w(r) used by the difference bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "exponent")]
pub enum WeightKind {
    /// r^{4-N} for N ≥ 5.
    Power(f64),
    /// |ln r| for N = 4.
    Log,
    /// -r for N = 3 (the ratio convention keeps κ̂ positive).
    Linear,
}

pub fn weight_kind(ctx: DimensionContext) -> WeightKind {
    match ctx.n() {
        3 => WeightKind::Linear,
        4 => WeightKind::Log,
        n => WeightKind::Power(4.0 - n as f64),
    }
}

/// w(r) for the dimension's weight kind.
pub fn difference_weight(ctx: DimensionContext, r: f64) -> f64 {
    match weight_kind(ctx) {
        WeightKind::Power(e) => r.powf(e),
        WeightKind::Log => r.ln().abs(),
        WeightKind::Linear => -r,
    }
}

/// Empirical inf/sup of (Ψ-Λ)/w over a log-spaced sample.
#[derive(Debug, Clone, Serialize)]
pub struct BoundCertificate {
    pub n: u32,
    pub r_lo: f64,
    pub r_hi: f64,
    pub n_samples: usize,
    pub kappa1_hat: f64,
    pub kappa2_hat: f64,
    pub weight: WeightKind,
}

/// Admissible upper end for the sandwich window: y_{(N-4)/2} for N ≥ 4 and
/// π for N = 3.
pub fn sandwich_window(ctx: DimensionContext) -> f64 {
    if ctx.n() == 3 {
        PI
    } else {
        specfun::first_zero(Order::from_twice(ctx.n() - 4).expect("supported"))
    }
}

/// Sample (Ψ-Λ)/w on a log-spaced grid and certify 0 < κ̂₁ ≤ κ̂₂.
pub fn certify_difference_bounds(
    ctx: DimensionContext,
    r_lo: f64,
    r_hi: f64,
    n_samples: usize,
) -> Result<BoundCertificate> {
    if !(r_lo > 0.0 && r_hi > r_lo) {
        return Err(Error::range(format!("bad range ({r_lo}, {r_hi})")));
    }
    if n_samples < 2 {
        return Err(Error::range("need at least 2 samples"));
    }
    let window = sandwich_window(ctx);
    if r_hi >= window {
        return Err(Error::range(format!(
            "r_hi = {r_hi} violates the zero constraint (window ends at {window})"
        )));
    }
    if ctx.n() == 4 && r_hi >= 1.0 {
        return Err(Error::range("for N = 4 the log weight degenerates at r = 1"));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let ratio = (r_hi / r_lo).ln();
    for i in 0..n_samples {
        let r = r_lo * (ratio * i as f64 / (n_samples - 1) as f64).exp();
        let val = psi_minus_lambda(ctx, r)? / difference_weight(ctx, r);
        lo = lo.min(val);
        hi = hi.max(val);
    }
    if !(lo > 0.0) {
        return Err(Error::Numeric(format!(
            "difference ratio not positive on ({r_lo}, {r_hi}): inf = {lo}"
        )));
    }
    Ok(BoundCertificate {
        n: ctx.n(),
        r_lo,
        r_hi,
        n_samples,
        kappa1_hat: lo,
        kappa2_hat: hi,
        weight: weight_kind(ctx),
    })
}

/// Radial derivative of Ψ-Λ of order 1 or 2, Richardson-extrapolated
/// central differences on [`psi_minus_lambda`].
pub fn radial_derivative(ctx: DimensionContext, order: u32, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::domain("derivative requires r > 0"));
    }
    let f = |x: f64| psi_minus_lambda(ctx, x);
    let h = 1e-3 * r;
    match order {
        1 => {
            let d = |h: f64| -> Result<f64> { Ok((f(r + h)? - f(r - h)?) / (2.0 * h)) };
            Ok((4.0 * d(h / 2.0)? - d(h)?) / 3.0)
        }
        2 => {
            let d = |h: f64| -> Result<f64> {
                Ok((f(r + h)? - 2.0 * f(r)? + f(r - h)?) / (h * h))
            };
            Ok((4.0 * d(h / 2.0)? - d(h)?) / 3.0)
        }
        _ => Err(Error::domain(format!("derivative order {order} not in [1, 2]"))),
    }
}

/// Report of `sup |∂^α(Ψ-Λ)| · r^{N-4+|α|}` over a grid.
#[derive(Debug, Clone, Serialize)]
pub struct DerivativeBoundReport {
    pub n: u32,
    pub alpha: u32,
    pub samples: usize,
    pub sup_weighted: f64,
    pub all_finite: bool,
}

pub fn derivative_bound_check(
    ctx: DimensionContext,
    alpha_order: u32,
    r_grid: &[f64],
) -> Result<DerivativeBoundReport> {
    if !(1..=2).contains(&alpha_order) {
        return Err(Error::domain(format!("alpha order {alpha_order} not in [1, 2]")));
    }
    let window = sandwich_window(ctx);
    if r_grid.is_empty() {
        return Err(Error::range("empty grid"));
    }
    for &r in r_grid {
        if !(r > 0.0 && r < window) {
            return Err(Error::range(format!(
                "grid point {r} outside the admissible interval (0, {window})"
            )));
        }
    }
    let mut sup = 0.0f64;
    let mut all_finite = true;
    for &r in r_grid {
        let d = radial_derivative(ctx, alpha_order, r)?;
        let weighted = d.abs() * r.powf(ctx.nf() - 4.0 + alpha_order as f64);
        if !weighted.is_finite() {
            all_finite = false;
        }
        sup = sup.max(weighted);
    }
    Ok(DerivativeBoundReport {
        n: ctx.n(),
        alpha: alpha_order,
        samples: r_grid.len(),
        sup_weighted: sup,
        all_finite,
    })
}

/// One row of the tabulation used by the CSV output.
#[derive(Debug, Clone, Copy)]
pub struct TableRow {
    pub r: f64,
    pub psi: f64,
    pub lambda: f64,
    pub diff: f64,
    pub weighted_ratio: f64,
}

/// Tabulate (r, Ψ, Λ, Ψ-Λ, (Ψ-Λ)/w) on a log-spaced grid.
pub fn tabulate(
    ctx: DimensionContext,
    r_lo: f64,
    r_hi: f64,
    n_samples: usize,
) -> Result<Vec<TableRow>> {
    if !(r_lo > 0.0 && r_hi > r_lo && n_samples >= 2) {
        return Err(Error::range(format!("bad tabulation range ({r_lo}, {r_hi})")));
    }
    let ratio = (r_hi / r_lo).ln();
    (0..n_samples)
        .map(|i| {
            let r = r_lo * (ratio * i as f64 / (n_samples - 1) as f64).exp();
            Ok(TableRow {
                r,
                psi: psi(ctx, r)?,
                lambda: lambda(ctx, r)?,
                diff: psi_minus_lambda(ctx, r)?,
                weighted_ratio: psi_minus_lambda(ctx, r)? / difference_weight(ctx, r),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    fn ctx(n: u32) -> DimensionContext {
        DimensionContext::new(n).unwrap()
    }

    #[test]
    fn dimension_context_exponents() {
        for n in 3..=8 {
            let c = ctx(n);
            assert!((1.0 / c.two_star() + 1.0 / c.two_plus() - 1.0).abs() < 1e-14);
            assert!(c.omega_n() > 0.0);
        }
        assert!(DimensionContext::new(2).is_err());
        assert!(DimensionContext::new(9).is_err());
        // omega_3 = 4 pi / 3, omega_4 = pi^2/2
        assert!(rel_err(ctx(3).omega_n(), 4.0 * PI / 3.0) < 1e-14);
        assert!(rel_err(ctx(4).omega_n(), PI * PI / 2.0) < 1e-14);
    }

    #[test]
    fn psi_closed_form_n3() {
        assert!(psi(ctx(3), PI / 2.0).unwrap().abs() < 1e-16);
        // closed form at r = 1, cross-checked against the Bessel formula
        let expect = 1f64.cos() / (4.0 * PI);
        assert!(rel_err(psi(ctx(3), 1.0).unwrap(), expect) < 1e-14);
        let nu = Order::half_integer(0).unwrap();
        let general = -0.25 * (2.0 * PI).powf(-0.5) * specfun::bessel_y(nu, 1.0).unwrap();
        assert!(rel_err(psi(ctx(3), 1.0).unwrap(), general) < 1e-13);
    }

    #[test]
    fn psi_short_range_law() {
        // r^{N-2} psi(r) -> 1/(N(N-2)omega_N)
        for n in 3..=8 {
            let c = ctx(n);
            let r = 1e-5f64;
            let got = r.powf(c.nf() - 2.0) * psi(c, r).unwrap();
            assert!(
                rel_err(got, c.newton_norm()) < 1e-4,
                "N={n}: {got} vs {}",
                c.newton_norm()
            );
        }
    }

    #[test]
    fn psi_far_field_amplitude() {
        // Psi(r) (2 pi r)^{(N-1)/2} / cos(r - (N-3)pi/4) -> 1/2 at points
        // where the cosine is bounded away from zero
        for n in 3..=5 {
            let c = ctx(n);
            let phase_shift = (c.nf() - 3.0) * PI / 4.0;
            let mut checked = 0;
            for k in 0..200 {
                let r = 60.0 + 0.37 * k as f64;
                let cosv = (r - phase_shift).cos();
                if cosv.abs() < 0.8 {
                    continue;
                }
                let amp = psi(c, r).unwrap() * (2.0 * PI * r).powf((c.nf() - 1.0) / 2.0) / cosv;
                assert!(
                    (amp - 0.5).abs() < 0.015,
                    "N={n} r={r}: amplitude {amp}"
                );
                checked += 1;
            }
            assert!(checked > 20);
        }
    }

    #[test]
    fn lambda_values() {
        assert!(rel_err(lambda(ctx(3), 1.0).unwrap(), 1.0 / (4.0 * PI)) < 1e-14);
        assert!(rel_err(lambda(ctx(4), 1.0).unwrap(), 1.0 / (4.0 * PI * PI)) < 1e-14);
        assert!(rel_err(lambda(ctx(5), 2.0).unwrap(), 1.0 / (64.0 * PI * PI)) < 1e-14);
        assert!(lambda(ctx(3), 0.0).is_err());
    }

    #[test]
    fn difference_closed_form_n3() {
        let expect = (1f64.cos() - 1.0) / (4.0 * PI);
        assert!(rel_err(psi_minus_lambda(ctx(3), 1.0).unwrap(), expect) < 1e-13);
    }

    #[test]
    fn difference_small_r_limit_n5() {
        // (Psi-Lambda)(r) * r -> 1/(16 pi^2)
        let c = ctx(5);
        let got = psi_minus_lambda(c, 1e-6).unwrap() * 1e-6;
        assert!(rel_err(got, 1.0 / (16.0 * PI * PI)) < 1e-4);
    }

    #[test]
    fn difference_sign_sandwich() {
        // N >= 4: positive on (0, y_{(N-4)/2}); N = 3: negative on (0, pi)
        for n in 4..=8 {
            let c = ctx(n);
            let hi = 0.999 * sandwich_window(c);
            for i in 0..1000 {
                let r = 1e-4 * (hi / 1e-4f64).powf(i as f64 / 999.0);
                assert!(
                    psi_minus_lambda(c, r).unwrap() > 0.0,
                    "N={n} r={r} not positive"
                );
            }
        }
        let c3 = ctx(3);
        for i in 0..1000 {
            let r = 1e-4 * (0.999 * PI / 1e-4f64).powf(i as f64 / 999.0);
            assert!(psi_minus_lambda(c3, r).unwrap() < 0.0);
        }
    }

    #[test]
    fn difference_consistency_with_direct_subtraction() {
        for n in 3..=8 {
            let c = ctx(n);
            let hi = 0.98 * sandwich_window(c);
            for i in 0..40 {
                let r = 0.5 + (hi - 0.5) * i as f64 / 39.0;
                if r <= 0.5 {
                    continue;
                }
                let fused = psi_minus_lambda(c, r).unwrap();
                let direct = psi(c, r).unwrap() - lambda(c, r).unwrap();
                assert!(
                    (fused - direct).abs() < 1e-9 * lambda(c, r).unwrap().abs(),
                    "N={n} r={r}"
                );
            }
        }
    }

    #[test]
    fn certify_bounds_n3_kappa2() {
        // ratio (Psi-Lambda)/(-r) lies in (0, 1/(8 pi)] on (0, 3]
        let cert = certify_difference_bounds(ctx(3), 1e-10, 3.0, 4000).unwrap();
        assert!(cert.kappa1_hat > 0.0);
        assert!(cert.kappa2_hat <= 1.0 / (8.0 * PI) + 1e-12);
        // the sup is attained at r -> 0 where (1-cos r)/(4 pi r^2) -> 1/(8 pi)
        assert!(rel_err(cert.kappa2_hat, 1.0 / (8.0 * PI)) < 1e-6);
    }

    #[test]
    fn certify_bounds_n4_n5() {
        let c5 = certify_difference_bounds(ctx(5), 1e-4, 0.9 * PI / 2.0, 500).unwrap();
        assert!(c5.kappa1_hat > 0.0 && c5.kappa1_hat <= c5.kappa2_hat);
        let c4 = certify_difference_bounds(ctx(4), 1e-4, 0.8, 500).unwrap();
        assert!(c4.kappa1_hat > 0.0 && c4.kappa1_hat <= c4.kappa2_hat);
        // range violating the zero constraint
        assert!(certify_difference_bounds(ctx(5), 1e-4, 2.0, 10).is_err());
    }

    #[test]
    fn derivative_matches_analytic_oracle_n3() {
        // d/dr[(cos r - 1)/(4 pi r)] = (-r sin r - (cos r - 1))/(4 pi r^2)
        let r = 1.0f64;
        let expect = (-r * r.sin() - (r.cos() - 1.0)) / (4.0 * PI * r * r);
        let got = radial_derivative(ctx(3), 1, r).unwrap();
        assert!(rel_err(got, expect) < 1e-6, "{got} vs {expect}");
        assert!((got - (-0.030_380_553_175_775)).abs() < 1e-5);
    }

    #[test]
    fn derivative_bound_reports() {
        let grid: Vec<f64> = (0..60)
            .map(|i| 1e-3 * (1.0f64 / 1e-3).powf(i as f64 / 59.0))
            .collect();
        let rep = derivative_bound_check(ctx(5), 1, &grid).unwrap();
        assert!(rep.all_finite && rep.sup_weighted.is_finite());
        let rep2 = derivative_bound_check(ctx(5), 2, &grid).unwrap();
        assert!(rep2.all_finite);
        // grid outside the admissible interval
        assert!(derivative_bound_check(ctx(5), 1, &[2.0]).is_err());
    }
}
