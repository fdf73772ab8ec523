//! Dual variational objects: the Birman-Schwinger operators
//! `A_Q v = Q^{1/2*} Ψ∗(Q^{1/2*} v)` and `G_Q v = Q^{1/2*} Λ∗(Q^{1/2*} v)`,
//! the dual functional `J_Q(v) = ‖v‖_{2⁺}^{2⁺}/2⁺ - (1/2)∫ v A_Q v`, the
//! projection `t_v` onto the mountain-pass fiber, Rayleigh-quotient upper
//! bounds for the mountain-pass level `L_Q`, the Sobolev constant `S` and
//! the threshold `L_Q* = S^{N/2}/(N ‖Q‖_∞^{(N-2)/2})`.

use crate::error::{Error, Result};
use crate::fundsol::DimensionContext;
use crate::radialops::{gauss_rule, Kernel, KernelMatrix, RadialFunction, RadialGrid};
use serde::Serialize;
use std::sync::Arc;

/// Nonnegative coefficient Q with an explicit sup-norm (grid maxima would
/// under-estimate it) and an optional periodic/decaying split.
#[derive(Debug, Clone)]
pub struct Coefficient {
    kind: CoefficientKind,
    sup_norm: f64,
    split: Option<Box<(Coefficient, Coefficient)>>,
}

#[derive(Debug, Clone)]
pub enum CoefficientKind {
    Constant(f64),
    Radial(RadialProfile),
}

/// Named radial coefficient families. All attain their maximum at the
/// origin with value `amplitude`.
#[derive(Debug, Clone)]
pub enum RadialProfile {
    /// `amplitude` on [0, radius], smooth bump decay to 0 on
    /// (radius, radius + width).
    SmoothedBall {
        radius: f64,
        width: f64,
        amplitude: f64,
    },
    /// amplitude · (1 - (r/scale)²)₊  — O(r²) flatness defect at the top.
    QuadraticCap { scale: f64, amplitude: f64 },
    /// amplitude · (1 - (r/scale)⁴)₊  — o(r²) flatness defect.
    QuarticCap { scale: f64, amplitude: f64 },
    /// amplitude · exp(-(r/width)²).
    Gaussian { width: f64, amplitude: f64 },
}

impl RadialProfile {
    fn eval(&self, r: f64) -> f64 {
        match *self {
            RadialProfile::SmoothedBall {
                radius,
                width,
                amplitude,
            } => {
                if r <= radius {
                    amplitude
                } else if r >= radius + width {
                    0.0
                } else {
                    // smooth bump transition exp(1 - 1/(1-s²)) with s ∈ (0,1)
                    let s = (r - radius) / width;
                    amplitude * (1.0 - 1.0 / (1.0 - s * s)).exp()
                }
            }
            RadialProfile::QuadraticCap { scale, amplitude } => {
                amplitude * (1.0 - (r / scale) * (r / scale)).max(0.0)
            }
            RadialProfile::QuarticCap { scale, amplitude } => {
                amplitude * (1.0 - (r / scale).powi(4)).max(0.0)
            }
            RadialProfile::Gaussian { width, amplitude } => {
                amplitude * (-(r / width) * (r / width)).exp()
            }
        }
    }

    fn amplitude(&self) -> f64 {
        match *self {
            RadialProfile::SmoothedBall { amplitude, .. }
            | RadialProfile::QuadraticCap { amplitude, .. }
            | RadialProfile::QuarticCap { amplitude, .. }
            | RadialProfile::Gaussian { amplitude, .. } => amplitude,
        }
    }
}

impl Coefficient {
    pub fn constant(q: f64) -> Result<Self> {
        if !(q > 0.0) {
            return Err(Error::domain(format!(
                "constant coefficient must be positive, got {q}"
            )));
        }
        Ok(Coefficient {
            kind: CoefficientKind::Constant(q),
            sup_norm: q,
            split: None,
        })
    }

    pub fn radial(profile: RadialProfile) -> Result<Self> {
        let amp = profile.amplitude();
        if !(amp > 0.0) {
            return Err(Error::domain("coefficient amplitude must be positive"));
        }
        Ok(Coefficient {
            kind: CoefficientKind::Radial(profile),
            sup_norm: amp,
            split: None,
        })
    }

    /// Attach an asymptotically periodic split Q = Q_per + Q_0, verified
    /// pointwise on a log sample.
    pub fn with_split(mut self, per: Coefficient, decaying: Coefficient) -> Result<Self> {
        for i in 0..200 {
            let r = 1e-3 * (1e4f64).powf(i as f64 / 199.0);
            let total = per.eval(r) + decaying.eval(r);
            if (total - self.eval(r)).abs() > 1e-12 * self.sup_norm.max(1.0) {
                return Err(Error::domain(format!(
                    "split does not reproduce the coefficient at r = {r}"
                )));
            }
        }
        self.split = Some(Box::new((per, decaying)));
        Ok(self)
    }

    pub fn eval(&self, r: f64) -> f64 {
        match &self.kind {
            CoefficientKind::Constant(q) => *q,
            CoefficientKind::Radial(p) => p.eval(r),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    pub fn split(&self) -> Option<&(Coefficient, Coefficient)> {
        self.split.as_deref()
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.kind, CoefficientKind::Constant(_))
    }

    /// Q^{1/2*}(r).
    pub fn pow_dual(&self, ctx: DimensionContext, r: f64) -> f64 {
        self.eval(r).max(0.0).powf(1.0 / ctx.two_star())
    }
}

/// Candidate critical point of J_Q with its cached scalars.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DualState {
    pub norm_2plus: f64,
    pub quadform_aq: f64,
    pub energy: f64,
    pub residual: f64,
}

/// Discretized dual problem on a radial grid: the Ψ and Λ kernel matrices
/// plus the sampled coefficient powers.
pub struct DualProblem {
    ctx: DimensionContext,
    grid: Arc<RadialGrid>,
    coef: Coefficient,
    psi: KernelMatrix,
    lambda: KernelMatrix,
    q_pow: Vec<f64>,
}

impl DualProblem {
    pub fn new(ctx: DimensionContext, grid: Arc<RadialGrid>, coef: Coefficient) -> Result<Self> {
        if grid.ctx() != ctx {
            return Err(Error::config(
                "grid dimension disagrees with the problem dimension",
            ));
        }
        let psi = KernelMatrix::build(&grid, &Kernel::Helmholtz(ctx));
        let lambda = KernelMatrix::build(&grid, &Kernel::Newton(ctx));
        let q_pow = grid.nodes().iter().map(|&r| coef.pow_dual(ctx, r)).collect();
        Ok(DualProblem {
            ctx,
            grid,
            coef,
            psi,
            lambda,
            q_pow,
        })
    }

    pub fn ctx(&self) -> DimensionContext {
        self.ctx
    }
    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }
    pub fn coefficient(&self) -> &Coefficient {
        &self.coef
    }
    pub fn psi_matrix(&self) -> &KernelMatrix {
        &self.psi
    }
    pub fn lambda_matrix(&self) -> &KernelMatrix {
        &self.lambda
    }

    /// Volume integral N ω_N ∫ v r^{N-1} dr of nodal values.
    pub fn integral(&self, values: &[f64]) -> f64 {
        self.grid.volume_integral(values)
    }

    /// Nodal L^p norm.
    pub fn norm(&self, values: &[f64], p: f64) -> f64 {
        let powed: Vec<f64> = values.iter().map(|v| v.abs().powf(p)).collect();
        self.grid.volume_integral(&powed).powf(1.0 / p)
    }

    /// Ψ∗g on the grid.
    pub fn apply_resolvent(&self, g: &[f64]) -> Vec<f64> {
        self.psi.apply(g)
    }

    /// A_Q v = Q^{1/2*} Ψ∗(Q^{1/2*} v).
    pub fn apply_a_q(&self, v: &[f64]) -> Vec<f64> {
        let weighted: Vec<f64> = v.iter().zip(&self.q_pow).map(|(v, q)| v * q).collect();
        let conv = self.psi.apply(&weighted);
        conv.iter().zip(&self.q_pow).map(|(c, q)| c * q).collect()
    }

    /// G_Q v = Q^{1/2*} Λ∗(Q^{1/2*} v).
    pub fn apply_g_q(&self, v: &[f64]) -> Vec<f64> {
        let weighted: Vec<f64> = v.iter().zip(&self.q_pow).map(|(v, q)| v * q).collect();
        let conv = self.lambda.apply(&weighted);
        conv.iter().zip(&self.q_pow).map(|(c, q)| c * q).collect()
    }

    /// ∫ v A_Q v.
    pub fn quad_a_q(&self, v: &[f64]) -> f64 {
        let av = self.apply_a_q(v);
        let prod: Vec<f64> = v.iter().zip(&av).map(|(a, b)| a * b).collect();
        self.integral(&prod)
    }

    /// J_Q(v) = ‖v‖_{2⁺}^{2⁺}/2⁺ - (1/2)∫ v A_Q v.
    pub fn energy(&self, v: &[f64]) -> f64 {
        let tp = self.ctx.two_plus();
        self.norm(v, tp).powf(tp) / tp - 0.5 * self.quad_a_q(v)
    }

    /// Gradient field |v|^{2⁺-2} v - A_Q v (the L^{2*} representative).
    pub fn gradient(&self, v: &[f64]) -> Vec<f64> {
        let tp = self.ctx.two_plus();
        let av = self.apply_a_q(v);
        v.iter()
            .zip(&av)
            .map(|(x, a)| {
                let nl = if *x == 0.0 {
                    0.0
                } else {
                    x.abs().powf(tp - 2.0) * x
                };
                nl - a
            })
            .collect()
    }

    /// t_v = (‖v‖_{2⁺}^{2⁺} / ∫ v A_Q v)^{1/(2-2⁺)}; requires a positive
    /// quadratic form.
    pub fn t_projection(&self, v: &[f64]) -> Result<f64> {
        let q = self.quad_a_q(v);
        if !(q > 0.0) {
            return Err(Error::NonpositiveForm(q));
        }
        let tp = self.ctx.two_plus();
        let n = self.norm(v, tp).powf(tp);
        Ok((n / q).powf(1.0 / (2.0 - tp)))
    }

    /// Rayleigh upper bound (1/N)(‖v‖²_{2⁺}/∫ v A_Q v)^{N/2} ≥ L_Q.
    pub fn mp_upper_bound(&self, v: &[f64]) -> Result<f64> {
        let q = self.quad_a_q(v);
        if !(q > 0.0) {
            return Err(Error::NonpositiveForm(q));
        }
        let tp = self.ctx.two_plus();
        let norm_sq = self.norm(v, tp).powi(2);
        Ok((norm_sq / q).powf(self.ctx.nf() / 2.0) / self.ctx.nf())
    }

    /// Cached scalars of a candidate state.
    pub fn dual_state(&self, v: &[f64]) -> DualState {
        let tp = self.ctx.two_plus();
        let norm_2plus = self.norm(v, tp);
        let quadform_aq = self.quad_a_q(v);
        let energy = norm_2plus.powf(tp) / tp - 0.5 * quadform_aq;
        let residual = self.norm(&self.gradient(v), tp);
        DualState {
            norm_2plus,
            quadform_aq,
            energy,
            residual,
        }
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> RadialFunction {
        RadialFunction::sample(&self.grid, f)
    }
}

/// Sobolev constant computed along both routes: (‖u₁‖_{2*}^{2*})^{2/N} and
/// (‖∇u₁‖₂²)^{2/N}. S is computed, never hard-coded, so quadrature error
/// stays self-consistent across gap checks.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SobolevConstant {
    pub via_norm: f64,
    pub via_gradient: f64,
}

impl SobolevConstant {
    pub fn value(&self) -> f64 {
        self.via_norm
    }

    pub fn cross_check_rel_err(&self) -> f64 {
        (self.via_norm - self.via_gradient).abs() / self.via_norm
    }
}

/// u₁(r) = (N(N-2))^{(N-2)/4} (1+r²)^{-(N-2)/2} and its radial derivative
/// drive the two quadrature routes for S.
pub fn sobolev_constant(ctx: DimensionContext) -> SobolevConstant {
    let nf = ctx.nf();
    let pref = (nf * (nf - 2.0)).powf((nf - 2.0) / 4.0);
    let u1 = move |r: f64| pref * (1.0 + r * r).powf(-(nf - 2.0) / 2.0);
    let du1 = move |r: f64| -pref * (nf - 2.0) * r * (1.0 + r * r).powf(-nf / 2.0);

    let r_max = 50.0;
    let mut breaks = vec![0.0, 1e-6];
    let mut r = 1e-6;
    while r < r_max {
        r = (r * 10f64.powf(0.2)).min(r_max);
        breaks.push(r);
    }
    let (gx, gw) = gauss_rule(16);
    let mut norm_int = 0.0; // ∫ u1^{2*} r^{N-1}
    let mut grad_int = 0.0; // ∫ (u1')² r^{N-1}
    for pair in breaks.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        for (x, w) in gx.iter().zip(gw) {
            let rr = 0.5 * (b - a) * x + 0.5 * (a + b);
            let wq = 0.5 * (b - a) * w * rr.powf(nf - 1.0);
            norm_int += wq * u1(rr).powf(ctx.two_star());
            grad_int += wq * du1(rr) * du1(rr);
        }
    }
    // tails over (R, ∞) by the substitution r = 1/x on (0, 1/R); the
    // transformed integrands are smooth, so no decay is lost to truncation
    for (x, w) in gx.iter().zip(gw) {
        let xx = 0.5 / r_max * x + 0.5 / r_max;
        let wq = 0.5 / r_max * w / (xx * xx);
        let rr = 1.0 / xx;
        norm_int += wq * rr.powf(nf - 1.0) * u1(rr).powf(ctx.two_star());
        grad_int += wq * rr.powf(nf - 1.0) * du1(rr) * du1(rr);
    }
    let via_norm = (ctx.surface() * norm_int).powf(2.0 / nf);
    let via_gradient = (ctx.surface() * grad_int).powf(2.0 / nf);
    SobolevConstant {
        via_norm,
        via_gradient,
    }
}

/// Threshold level L_Q* = S^{N/2} / (N ‖Q‖_∞^{(N-2)/2}).
pub fn l_q_star(ctx: DimensionContext, coef: &Coefficient) -> Result<f64> {
    let q = coef.sup_norm();
    if !(q > 0.0) {
        return Err(Error::domain("coefficient has zero sup norm"));
    }
    let s = sobolev_constant(ctx).value();
    Ok(s.powf(ctx.nf() / 2.0) / (ctx.nf() * q.powf((ctx.nf() - 2.0) / 2.0)))
}

/// How Q approaches its maximum at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FlatnessClass {
    /// (Q(0)-Q(r))/r² → 0.
    LittleO,
    /// ratio stays bounded.
    BigO,
    /// ratio grows as r → 0 (not even O(r²)).
    Unbounded,
}

#[derive(Debug, Clone, Serialize)]
pub struct FlatnessReport {
    pub radii: Vec<f64>,
    pub ratios: Vec<f64>,
    pub limsup_tail: f64,
    pub class: FlatnessClass,
}

/// Sample (Q(0)-Q(r))/r² on shrinking radii and classify the trend. The
/// default radii halve from 1e-1 down to 1e-6.
pub fn flatness_check(
    coef: &Coefficient,
    radii: Option<Vec<f64>>,
) -> Result<FlatnessReport> {
    let q0 = coef.eval(0.0);
    if (q0 - coef.sup_norm()).abs() > 1e-12 * coef.sup_norm() {
        return Err(Error::Precondition(format!(
            "Q(0) = {q0} is not the sup norm {}",
            coef.sup_norm()
        )));
    }
    let radii = radii.unwrap_or_else(|| {
        let mut rs = Vec::new();
        let mut r = 0.1;
        while r >= 1e-6 {
            rs.push(r);
            r *= 0.5;
        }
        rs
    });
    if radii.len() < 4 {
        return Err(Error::config("need at least 4 radii for a trend"));
    }
    let ratios: Vec<f64> = radii.iter().map(|&r| (q0 - coef.eval(r)) / (r * r)).collect();
    let tail_n = (radii.len() / 3).max(2);
    let tail = &ratios[ratios.len() - tail_n..];
    let limsup_tail = tail.iter().cloned().fold(f64::MIN, f64::max);
    let max_all = ratios.iter().cloned().fold(f64::MIN, f64::max);

    let class = if max_all <= 0.0 || limsup_tail <= 1e-10 * max_all.max(1e-300) {
        FlatnessClass::LittleO
    } else {
        // trend on the tail: ratio ~ C r^p
        let k = ratios.len();
        let (r_a, r_b) = (radii[k - tail_n], radii[k - 1]);
        let (y_a, y_b) = (ratios[k - tail_n].max(1e-300), ratios[k - 1].max(1e-300));
        let p = (y_a / y_b).ln() / (r_a / r_b).ln();
        if p > 0.15 {
            FlatnessClass::LittleO
        } else if p > -0.15 {
            FlatnessClass::BigO
        } else {
            FlatnessClass::Unbounded
        }
    };
    Ok(FlatnessReport {
        radii,
        ratios,
        limsup_tail,
        class,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radialops::{lp_norm, PanelSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    fn ctx(n: u32) -> DimensionContext {
        DimensionContext::new(n).unwrap()
    }

    fn problem(n: u32) -> DualProblem {
        let c = ctx(n);
        let spec = PanelSpec::for_kernels(1e-4, 12.0);
        let grid = Arc::new(RadialGrid::new(c, &spec).unwrap());
        DualProblem::new(c, grid, Coefficient::constant(1.0).unwrap()).unwrap()
    }

    #[test]
    fn sobolev_constant_oracles() {
        // N=4: Beta-integral oracle (32 π²/3)^{1/2}; N=3: (3√3π²/4)^{2/3}
        let s4 = sobolev_constant(ctx(4));
        assert!(rel_err(s4.value(), (32.0 * PI * PI / 3.0f64).sqrt()) < 1e-8);
        assert!(s4.cross_check_rel_err() < 1e-6);
        let s3 = sobolev_constant(ctx(3));
        assert!(rel_err(s3.value(), (3.0 * 3.0f64.sqrt() * PI * PI / 4.0).powf(2.0 / 3.0)) < 1e-8);
        let s5 = sobolev_constant(ctx(5));
        assert!(s5.cross_check_rel_err() < 1e-6);
        assert!(s3.cross_check_rel_err() < 1e-6);
    }

    #[test]
    fn l_q_star_values() {
        let one = Coefficient::constant(1.0).unwrap();
        let got4 = l_q_star(ctx(4), &one).unwrap();
        assert!(rel_err(got4, 8.0 * PI * PI / 3.0) < 1e-7, "{got4}");
        // doubling ‖Q‖_∞ halves L* in N = 4
        let two = Coefficient::constant(2.0).unwrap();
        assert!(rel_err(l_q_star(ctx(4), &two).unwrap(), got4 / 2.0) < 1e-12);
        let got3 = l_q_star(ctx(3), &one).unwrap();
        let s3 = sobolev_constant(ctx(3)).value();
        assert!(rel_err(got3, s3.powf(1.5) / 3.0) < 1e-12);
    }

    #[test]
    fn a_q_symmetry_and_vanishing() {
        let c = ctx(4);
        let spec = PanelSpec::for_kernels(1e-4, 12.0);
        let grid = Arc::new(RadialGrid::new(c, &spec).unwrap());
        let coef = Coefficient::radial(RadialProfile::SmoothedBall {
            radius: 3.0,
            width: 1.0,
            amplitude: 1.0,
        })
        .unwrap();
        let p = DualProblem::new(c, grid.clone(), coef).unwrap();
        let v = RadialFunction::sample(&grid, |r| (-0.4 * r * r).exp());
        let w = RadialFunction::sample(&grid, |r| r * (-0.8 * r).exp());
        let av = p.apply_a_q(v.values());
        let aw = p.apply_a_q(w.values());
        let vw: Vec<f64> = w.values().iter().zip(&av).map(|(a, b)| a * b).collect();
        let wv: Vec<f64> = v.values().iter().zip(&aw).map(|(a, b)| a * b).collect();
        assert!(rel_err(p.integral(&vw), p.integral(&wv)) < 1e-8);
        // A_Q vanishes where Q does
        for (i, &r) in grid.nodes().iter().enumerate() {
            if r > 4.0 {
                assert_eq!(av[i], 0.0);
            }
        }
    }

    #[test]
    fn a_q_equals_resolvent_for_unit_q() {
        let p = problem(4);
        let v = p.sample(|r| (-r * r).exp());
        let av = p.apply_a_q(v.values());
        let rv = p.apply_resolvent(v.values());
        for (a, b) in av.iter().zip(&rv) {
            assert!((a - b).abs() < 1e-12 * b.abs().max(1e-12));
        }
    }

    #[test]
    fn energy_and_projection_identities() {
        let p = problem(4);
        let tp = p.ctx().two_plus();
        let zero = vec![0.0; p.grid().len()];
        assert_eq!(p.energy(&zero), 0.0);

        let v = p.sample(|r| (-0.5 * r * r).exp());
        let t = p.t_projection(v.values()).unwrap();
        let tv: Vec<f64> = v.values().iter().map(|x| t * x).collect();
        // J(t_v v) equals the Rayleigh expression to 1e-10
        let mp = p.mp_upper_bound(v.values()).unwrap();
        assert!(rel_err(p.energy(&tv), mp) < 1e-10);
        // scale invariance of the bound
        let v3: Vec<f64> = v.values().iter().map(|x| 3.0 * x).collect();
        assert!(rel_err(p.mp_upper_bound(&v3).unwrap(), mp) < 1e-12);
        // homogeneity t_{cv}·c = t_v
        let t3 = p.t_projection(&v3).unwrap();
        assert!(rel_err(3.0 * t3, t) < 1e-12);
        // energy identity on the fiber: J(t_v v) = ‖t_v v‖^{2⁺}/N
        let nrm = p.norm(&tv, tp);
        assert!(rel_err(p.energy(&tv), nrm.powf(tp) / p.ctx().nf()) < 1e-10);
        // max property on a 100-point bracket around t_v
        for k in 1..=100 {
            let tt = t * (0.6 + 0.8 * k as f64 / 100.0);
            let vv: Vec<f64> = v.values().iter().map(|x| tt * x).collect();
            assert!(p.energy(&vv) <= p.energy(&tv) + 1e-12);
        }
    }

    #[test]
    fn mountain_pass_shape() {
        let p = problem(4);
        let v = p.sample(|r| (-0.5 * r * r).exp());
        let t_star = p.t_projection(v.values()).unwrap();
        for k in 1..=20 {
            let t = t_star * k as f64 / 40.0;
            let tv: Vec<f64> = v.values().iter().map(|x| t * x).collect();
            assert!(p.energy(&tv) > 0.0, "J should be positive at t={t}");
        }
        let big: Vec<f64> = v.values().iter().map(|x| 40.0 * t_star * x).collect();
        assert!(p.energy(&big) < 0.0);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let p = problem(4);
        let v = p.sample(|r| (-0.5 * r * r).exp() * (1.0 + 0.2 * r));
        // direction decaying faster than v^{5/3} keeps |v|^{2⁺-3} w³, and
        // with it the third derivative of t ↦ J(v+tw), integrable
        let w = p.sample(|r| (-1.2 * r * r).exp() * (0.3 + 0.5 * r));
        let grad = p.gradient(v.values());
        let prod: Vec<f64> = grad.iter().zip(w.values()).map(|(a, b)| a * b).collect();
        let directional = p.integral(&prod);
        let mut errs = Vec::new();
        for h in [1e-3, 1e-4] {
            let vp: Vec<f64> = v
                .values()
                .iter()
                .zip(w.values())
                .map(|(a, b)| a + h * b)
                .collect();
            let vm: Vec<f64> = v
                .values()
                .iter()
                .zip(w.values())
                .map(|(a, b)| a - h * b)
                .collect();
            let fd = (p.energy(&vp) - p.energy(&vm)) / (2.0 * h);
            errs.push((fd - directional).abs());
        }
        assert!(errs[0] < 1e-3 * directional.abs().max(1.0));
        // observed order ≥ 1.9 on the h-halving decade
        let order = (errs[0] / errs[1].max(1e-300)).log10();
        assert!(order >= 1.9, "observed FD order {order}");
        // oddness under v -> -v
        let neg: Vec<f64> = v.values().iter().map(|x| -x).collect();
        let gneg = p.gradient(&neg);
        for (a, b) in grad.iter().zip(&gneg) {
            assert!((a + b).abs() < 1e-12 * a.abs().max(1e-12));
        }
    }

    #[test]
    fn projection_rejects_nonpositive_form() {
        let p = problem(3);
        let zero = vec![0.0; p.grid().len()];
        assert!(matches!(
            p.t_projection(&zero),
            Err(Error::NonpositiveForm(_))
        ));
    }

    #[test]
    fn hls_inequality_random_profiles() {
        // ∫ f Λ∗f ≤ S^{-1} ‖f‖²_{2⁺} for nonnegative radial profiles
        let c = ctx(3);
        let spec = PanelSpec::geometric(1e-4, 25.0);
        let grid = Arc::new(RadialGrid::new(c, &spec).unwrap());
        let s = sobolev_constant(c).value();
        let lam = KernelMatrix::build(&grid, &Kernel::Newton(c));
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let a: f64 = rng.gen_range(0.1..2.0);
            let b: f64 = rng.gen_range(0.2..3.0);
            let cshift: f64 = rng.gen_range(0.0..2.0);
            let d: f64 = rng.gen_range(0.2..2.0);
            let f = RadialFunction::sample(&grid, |r| {
                a * (-b * r * r).exp() + d * (-(r - cshift).powi(2)).exp()
            });
            let form = lam.bilinear(f.values(), f.values());
            let norm = lp_norm(&f, c.two_plus()).unwrap();
            assert!(
                form <= norm * norm / s * (1.0 + 1e-4),
                "HLS violated: {form} vs {}",
                norm * norm / s
            );
        }
    }

    #[test]
    fn flatness_classification() {
        let const_q = Coefficient::constant(1.0).unwrap();
        assert_eq!(
            flatness_check(&const_q, None).unwrap().class,
            FlatnessClass::LittleO
        );
        let quartic = Coefficient::radial(RadialProfile::QuarticCap {
            scale: 1.0,
            amplitude: 1.0,
        })
        .unwrap();
        assert_eq!(
            flatness_check(&quartic, None).unwrap().class,
            FlatnessClass::LittleO
        );
        let quadratic = Coefficient::radial(RadialProfile::QuadraticCap {
            scale: 1.0,
            amplitude: 1.0,
        })
        .unwrap();
        let rep = flatness_check(&quadratic, None).unwrap();
        assert_eq!(rep.class, FlatnessClass::BigO);
        // exact quotient 1 for (1-r²)₊; the float cancellation in
        // 1-(1-r²) at r = 1e-6 leaves ~1e-4 of noise in the sampled ratio
        assert!(rel_err(rep.limsup_tail, 1.0) < 1e-3);
    }

    #[test]
    fn coefficient_split_consistency() {
        let gauss = Coefficient::radial(RadialProfile::Gaussian {
            width: 2.0,
            amplitude: 1.0,
        })
        .unwrap();
        // wrong split rejected
        assert!(Coefficient::constant(1.0)
            .unwrap()
            .with_split(gauss.clone(), gauss.clone())
            .is_err());
    }
}
