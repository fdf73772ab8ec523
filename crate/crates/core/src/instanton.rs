//! Aubin-Talenti instantons, their dual profiles, cutoff families, and the
//! four-term bilinear decomposition behind the strict-gap certificate
//! `L_Q < L_Q*` for `N ≥ 4`:
//!
//! ```text
//! ∫ v_{ε,α} A_Q v_{ε,α} = ∫ v_ε G_q v_ε                       (main)
//!                       - ∫ (1+φ_α) v_ε G_q((1-φ_α) v_ε)      (tail)
//!                       + ∫ v_{ε,α}(A_q - G_q) v_{ε,α}        (kernel)
//!                       - ∫ v_{ε,α}(A_q - A_Q) v_{ε,α}        (coeff)
//! ```
//!
//! All four terms are computed by quadrature; the identity is algebraic, so
//! the assembled right side must reproduce the direct quadratic form, which
//! is one of the module's consistency checks. The kernel term rides on the
//! sign of `Ψ - Λ`: positive near 0 for `N ≥ 4`, negative for `N = 3`.

use crate::dualvar::{self, Coefficient, FlatnessClass, SobolevConstant};
use crate::error::{Error, Result};
use crate::fundsol::{self, DimensionContext};
use crate::radialops::{
    gauss_rule, newton_bilinear, BilinearTable, Kernel, RadialFunction, RadialGrid,
};
use serde::Serialize;
use std::sync::Arc;

/// Aubin-Talenti instanton u_ε(r) = (N(N-2)ε)^{(N-2)/4} (ε+r²)^{-(N-2)/2}.
pub fn u_instanton(ctx: DimensionContext, eps: f64, r: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::domain(format!(
            "instanton scale must be positive, got {eps}"
        )));
    }
    if r < 0.0 {
        return Err(Error::domain("radius must be nonnegative"));
    }
    let nf = ctx.nf();
    Ok((nf * (nf - 2.0) * eps).powf((nf - 2.0) / 4.0) * (eps + r * r).powf(-(nf - 2.0) / 2.0))
}

/// Dual instanton v_ε(r) = (N(N-2)ε)^{(N+2)/4} (ε+r²)^{-(N+2)/2} = u_ε^{2*-1}.
pub fn v_instanton(ctx: DimensionContext, eps: f64, r: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::domain(format!(
            "instanton scale must be positive, got {eps}"
        )));
    }
    if r < 0.0 {
        return Err(Error::domain("radius must be nonnegative"));
    }
    let nf = ctx.nf();
    Ok((nf * (nf - 2.0) * eps).powf((nf + 2.0) / 4.0) * (eps + r * r).powf(-(nf + 2.0) / 2.0))
}

/// Smooth radial bump: 1 on [0,1], exp(1 - 1/(1-(t-1)²)) on (1,2), 0 from 2.
pub fn cutoff_profile(t: f64) -> f64 {
    if t <= 1.0 {
        1.0
    } else if t >= 2.0 {
        0.0
    } else {
        let s = t - 1.0;
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

/// Scales of a truncated dual instanton v_{ε,α} = φ(·/α) v_ε.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct InstantonParams {
    pub eps: f64,
    pub alpha: f64,
}

impl InstantonParams {
    pub fn new(eps: f64, alpha: f64) -> Result<Self> {
        if !(eps > 0.0 && alpha > 0.0) {
            return Err(Error::domain(format!(
                "need eps, alpha > 0, got ({eps}, {alpha})"
            )));
        }
        Ok(InstantonParams { eps, alpha })
    }
}

/// Sample v_{ε,α} on a grid covering its support [0, 2α].
pub fn cutoff_family(params: InstantonParams, grid: &Arc<RadialGrid>) -> Result<RadialFunction> {
    if grid.r_max() < 2.0 * params.alpha {
        return Err(Error::range(format!(
            "grid extends to {} but the cutoff support needs {}",
            grid.r_max(),
            2.0 * params.alpha
        )));
    }
    let ctx = grid.ctx();
    Ok(RadialFunction::sample(grid, |r| {
        cutoff_profile(r / params.alpha) * v_instanton(ctx, params.eps, r).expect("valid params")
    }))
}

/// Outcome of a gap certification run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GapStatus {
    GapCertified,
    NoGapEquality,
    Inconclusive,
}

/// The four decomposition terms and the resulting mountain-pass upper bound
/// against L_Q*, with a propagated quadrature error bar.
#[derive(Debug, Clone, Serialize)]
pub struct GapCertificate {
    pub n: u32,
    pub eps: f64,
    pub alpha: f64,
    pub term_main: f64,
    pub term_tail: f64,
    pub term_kernel: f64,
    pub term_coeff: f64,
    /// term_main - term_tail + term_kernel - term_coeff = ∫ v A_Q v
    pub quad_aq: f64,
    pub norm_2plus: f64,
    pub upper_bound: f64,
    pub l_star: f64,
    pub gap: f64,
    pub error_bar: f64,
    pub kernel_term_positive: bool,
    pub certified: bool,
}

/// Quadrature quality knobs for the certificate machinery.
#[derive(Debug, Clone, Copy)]
pub struct GapQuality {
    pub nodes_per_panel: usize,
    pub panels_per_decade: f64,
    pub r_min_factor: f64,
    pub r_max_factor: f64,
}

impl Default for GapQuality {
    fn default() -> Self {
        GapQuality {
            nodes_per_panel: 14,
            panels_per_decade: 5.0,
            r_min_factor: 1e-3,
            r_max_factor: 400.0,
        }
    }
}

impl GapQuality {
    fn coarse(&self) -> Self {
        GapQuality {
            nodes_per_panel: self.nodes_per_panel - 4,
            panels_per_decade: (self.panels_per_decade - 1.5).max(2.0),
            r_min_factor: self.r_min_factor * 4.0,
            r_max_factor: self.r_max_factor * 0.5,
        }
    }
}

/// Geometric breakpoints with marker radii (cutoff edges) inserted so every
/// panel sees a smooth integrand.
fn breaks_with_markers(r_min: f64, r_max: f64, ppd: f64, markers: &[f64]) -> Vec<f64> {
    let n = ((r_max / r_min).log10() * ppd).ceil().max(1.0) as usize;
    let mut breaks: Vec<f64> = (0..=n)
        .map(|i| r_min * (r_max / r_min).powf(i as f64 / n as f64))
        .collect();
    for &m in markers {
        if m > r_min * 1.000001 && m < r_max * 0.999999 {
            breaks.push(m);
        }
    }
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-9 * *b);
    breaks
}

/// Half of the certificate engine: kernel tables on [r_min, 2α] reused
/// across the ε-scan, Λ-route breaks for the main/tail terms.
struct GapEngine {
    ctx: DimensionContext,
    alpha: f64,
    quality: GapQuality,
    sqrt_eps_range: (f64, f64),
    table_diff: BilinearTable,
    table_psi: Option<BilinearTable>,
    lambda_breaks: Vec<f64>,
    norm_breaks: Vec<f64>,
}

impl GapEngine {
    fn new(
        ctx: DimensionContext,
        coef: &Coefficient,
        alpha: f64,
        eps_range: (f64, f64),
        quality: GapQuality,
    ) -> Result<Self> {
        let (eps_lo, eps_hi) = eps_range;
        if !(eps_lo > 0.0 && eps_hi >= eps_lo) {
            return Err(Error::config("bad eps range"));
        }
        let r_min = quality.r_min_factor * eps_lo.sqrt();
        let r_max = quality.r_max_factor * eps_hi.sqrt().max(alpha);
        let kernel_breaks =
            breaks_with_markers(r_min, 2.0 * alpha, quality.panels_per_decade, &[alpha]);
        let grid = Arc::new(RadialGrid::from_breaks(
            ctx,
            kernel_breaks,
            quality.nodes_per_panel,
        )?);
        let table_diff = BilinearTable::build(&grid, &Kernel::HelmholtzMinusNewton(ctx));
        let table_psi = if coef.is_constant() {
            None
        } else {
            Some(BilinearTable::build(&grid, &Kernel::Helmholtz(ctx)))
        };
        let lambda_breaks = breaks_with_markers(
            r_min,
            r_max,
            quality.panels_per_decade,
            &[alpha, 2.0 * alpha],
        );
        let norm_breaks =
            breaks_with_markers(r_min, 2.0 * alpha, quality.panels_per_decade, &[alpha]);
        Ok(GapEngine {
            ctx,
            alpha,
            quality,
            sqrt_eps_range: (eps_lo.sqrt(), eps_hi.sqrt()),
            table_diff,
            table_psi,
            lambda_breaks,
            norm_breaks,
        })
    }

    /// The four terms and the cutoff norm.
    fn terms(&self, coef: &Coefficient, eps: f64) -> Result<RawTerms> {
        let ctx = self.ctx;
        let alpha = self.alpha;
        let q = coef.sup_norm();
        let q_dual_pow = q.powf(2.0 / ctx.two_star());
        let v = move |r: f64| v_instanton(ctx, eps, r).expect("eps > 0");
        let phi = move |r: f64| cutoff_profile(r / alpha);
        let v_cut = move |r: f64| phi(r) * v(r);

        let term_main = q_dual_pow
            * newton_bilinear(ctx, v, v, &self.lambda_breaks, self.quality.nodes_per_panel)?;
        let term_tail = q_dual_pow
            * newton_bilinear(
                ctx,
                move |r| (1.0 + phi(r)) * v(r),
                move |r| (1.0 - phi(r)) * v(r),
                &self.lambda_breaks,
                self.quality.nodes_per_panel,
            )?;
        let term_kernel = q_dual_pow * self.table_diff.bilinear(v_cut, v_cut);
        let term_coeff = match &self.table_psi {
            None => 0.0,
            Some(table) => {
                let q_pow = q.powf(1.0 / ctx.two_star());
                let coef2 = coef.clone();
                let coef3 = coef.clone();
                table.bilinear(
                    move |r| (q_pow - coef2.pow_dual(ctx, r)) * v_cut(r),
                    move |r| (q_pow + coef3.pow_dual(ctx, r)) * v_cut(r),
                )
            }
        };
        let tp = ctx.two_plus();
        let norm_2plus = crate::radialops::lp_norm_profile(
            ctx,
            v_cut,
            tp,
            &self.norm_breaks,
            self.quality.nodes_per_panel,
        )?;
        Ok(RawTerms {
            term_main,
            term_tail,
            term_kernel,
            term_coeff,
            norm_2plus,
        })
    }
}

#[derive(Debug, Clone, Copy)]
struct RawTerms {
    term_main: f64,
    term_tail: f64,
    term_kernel: f64,
    term_coeff: f64,
    norm_2plus: f64,
}

impl RawTerms {
    fn quad_aq(&self) -> f64 {
        self.term_main - self.term_tail + self.term_kernel - self.term_coeff
    }

    fn upper_bound(&self, ctx: DimensionContext) -> f64 {
        let nf = ctx.nf();
        (self.norm_2plus.powi(2) / self.quad_aq()).powf(nf / 2.0) / nf
    }
}

/// Certificate machinery reusable across an ε-scan: builds the kernel
/// tables once (fine and coarse for error bars) plus the Sobolev constant.
pub struct GapMachine {
    ctx: DimensionContext,
    coef: Coefficient,
    alpha: f64,
    fine: GapEngine,
    coarse: GapEngine,
    sobolev: SobolevConstant,
    l_star: f64,
}

impl GapMachine {
    pub fn new(
        ctx: DimensionContext,
        coef: Coefficient,
        alpha: f64,
        eps_range: (f64, f64),
        quality: GapQuality,
    ) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::domain("alpha must be positive"));
        }
        let fine = GapEngine::new(ctx, &coef, alpha, eps_range, quality)?;
        let coarse = GapEngine::new(ctx, &coef, alpha, eps_range, quality.coarse())?;
        let sobolev = dualvar::sobolev_constant(ctx);
        let l_star = dualvar::l_q_star(ctx, &coef)?;
        Ok(GapMachine {
            ctx,
            coef,
            alpha,
            fine,
            coarse,
            sobolev,
            l_star,
        })
    }

    pub fn sobolev(&self) -> SobolevConstant {
        self.sobolev
    }

    pub fn l_star(&self) -> f64 {
        self.l_star
    }

    /// One certificate at the given ε. Requires 0 < ε ≤ α²; for N = 3 the
    /// kernel term is nonpositive and the certificate is never a gap proof.
    pub fn certificate(&self, eps: f64) -> Result<GapCertificate> {
        if !(eps > 0.0) {
            return Err(Error::domain("eps must be positive"));
        }
        if eps > self.alpha * self.alpha {
            return Err(Error::Precondition(format!(
                "eps = {eps} exceeds alpha² = {}",
                self.alpha * self.alpha
            )));
        }
        let (slo, shi) = self.fine.sqrt_eps_range;
        if eps.sqrt() < slo * 0.999999 || eps.sqrt() > shi * 1.000001 {
            return Err(Error::range(format!(
                "eps = {eps} outside the range this machine was built for"
            )));
        }
        let fine = self.fine.terms(&self.coef, eps)?;
        let coarse = self.coarse.terms(&self.coef, eps)?;
        let quad = fine.quad_aq();
        if !(quad > 0.0) {
            return Err(Error::Numeric(format!(
                "quadratic form not positive at eps = {eps}"
            )));
        }
        let ub = fine.upper_bound(self.ctx);

        // error bar: per-term fine-vs-coarse deltas propagated through
        // U = (1/N)(n²/q)^{N/2}:  δU/U = (N/2)(2 δn/n + δq/q)
        let dq = (fine.term_main - coarse.term_main).abs()
            + (fine.term_tail - coarse.term_tail).abs()
            + (fine.term_kernel - coarse.term_kernel).abs()
            + (fine.term_coeff - coarse.term_coeff).abs();
        let dn = (fine.norm_2plus - coarse.norm_2plus).abs();
        let error_bar = ub * (self.ctx.nf() / 2.0) * (2.0 * dn / fine.norm_2plus + dq / quad);

        let gap = self.l_star - ub;
        let kernel_term_positive = fine.term_kernel > 0.0;
        let certified = self.ctx.n() >= 4 && gap > error_bar && kernel_term_positive;
        Ok(GapCertificate {
            n: self.ctx.n(),
            eps,
            alpha: self.alpha,
            term_main: fine.term_main,
            term_tail: fine.term_tail,
            term_kernel: fine.term_kernel,
            term_coeff: fine.term_coeff,
            quad_aq: quad,
            norm_2plus: fine.norm_2plus,
            upper_bound: ub,
            l_star: self.l_star,
            gap,
            error_bar,
            kernel_term_positive,
            certified,
        })
    }

    /// Direct quadratic form ∫ v_{ε,α} A_Q v_{ε,α} through the Ψ table (an
    /// independent route; the decomposition must reproduce it).
    pub fn direct_quad_aq(&self, eps: f64) -> Result<f64> {
        let ctx = self.ctx;
        let alpha = self.alpha;
        let v_cut =
            move |r: f64| cutoff_profile(r / alpha) * v_instanton(ctx, eps, r).expect("eps > 0");
        match &self.fine.table_psi {
            Some(table) => {
                let coef2 = self.coef.clone();
                let coef3 = self.coef.clone();
                Ok(table.bilinear(
                    move |r| coef2.pow_dual(ctx, r) * v_cut(r),
                    move |r| coef3.pow_dual(ctx, r) * v_cut(r),
                ))
            }
            None => {
                // constant coefficient: A_q = q^{2/2*} Ψ∗·; build on demand
                Ok(self.coef.sup_norm().powf(2.0 / ctx.two_star())
                    * BilinearTable::build(self.fine.table_diff.grid(), &Kernel::Helmholtz(ctx))
                        .bilinear(v_cut, v_cut))
            }
        }
    }
}

/// Convenience single-shot decomposition with default quality.
pub fn bilinear_decomposition(
    ctx: DimensionContext,
    coef: &Coefficient,
    params: InstantonParams,
) -> Result<GapCertificate> {
    let machine = GapMachine::new(
        ctx,
        coef.clone(),
        params.alpha,
        (params.eps, params.eps),
        GapQuality::default(),
    )?;
    machine.certificate(params.eps)
}

/// Result of an ε-scan: all certificates and the minimizer of the upper
/// bound.
#[derive(Debug, Clone, Serialize)]
pub struct GapScan {
    pub certificates: Vec<GapCertificate>,
    pub best: usize,
    pub status: GapStatus,
}

/// Scan the ε-list, certify where possible. For N ≥ 4 the coefficient must
/// pass the flatness requirement at its maximum: o(r²) for N ≥ 5, O(r²)
/// for N = 4. N = 3 scans report the no-gap trend instead of failing.
pub fn strict_gap_scan(
    ctx: DimensionContext,
    coef: &Coefficient,
    alpha: f64,
    eps_list: &[f64],
) -> Result<GapScan> {
    if eps_list.is_empty() {
        return Err(Error::config("empty eps list"));
    }
    if ctx.n() >= 4 {
        let report = dualvar::flatness_check(coef, None)?;
        let ok = match report.class {
            FlatnessClass::LittleO => true,
            FlatnessClass::BigO => ctx.n() == 4,
            FlatnessClass::Unbounded => false,
        };
        if !ok {
            return Err(Error::Precondition(format!(
                "coefficient flatness {:?} insufficient for N = {}",
                report.class,
                ctx.n()
            )));
        }
    }
    let lo = eps_list.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = eps_list.iter().cloned().fold(0.0f64, f64::max);
    let machine = GapMachine::new(ctx, coef.clone(), alpha, (lo, hi), GapQuality::default())?;
    let mut certificates = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        certificates.push(machine.certificate(eps)?);
    }
    let best = certificates
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.upper_bound.partial_cmp(&b.1.upper_bound).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    let status = if ctx.n() == 3 {
        GapStatus::NoGapEquality
    } else if certificates.iter().any(|c| c.certified) {
        GapStatus::GapCertified
    } else {
        GapStatus::Inconclusive
    };
    Ok(GapScan {
        certificates,
        best,
        status,
    })
}

/// Paper-style lower-bound coefficient for the kernel term: γ = 2^{4-N} κ₀
/// q^{2/2*} (∫_{B1} v₁ dx)², with κ₀ the certified lower constant of the
/// difference bounds on (0, min(4α, 0.9·window)]. For N = 4 the bound reads
/// γ ε |ln(2√ε)| instead of γ ε.
pub fn kernel_term_lower_coefficient(
    ctx: DimensionContext,
    coef: &Coefficient,
    alpha: f64,
) -> Result<f64> {
    if ctx.n() < 4 {
        return Err(Error::domain("kernel-term lower bound needs N >= 4"));
    }
    let window = fundsol::sandwich_window(ctx);
    let mut hi = (4.0 * alpha).min(0.9 * window);
    if ctx.n() == 4 {
        hi = hi.min(0.9); // keep the log weight away from its zero at r = 1
    }
    let cert = fundsol::certify_difference_bounds(ctx, 1e-6, hi, 2000)?;
    let kappa0 = cert.kappa1_hat;
    // ∫_{B1} v1
    let (gx, gw) = gauss_rule(16);
    let mut mass = 0.0;
    let breaks = breaks_with_markers(1e-8, 1.0, 4.0, &[]);
    for pair in breaks.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        for (x, w) in gx.iter().zip(gw) {
            let r = 0.5 * (b - a) * x + 0.5 * (a + b);
            mass += 0.5 * (b - a) * w * r.powf(ctx.nf() - 1.0) * v_instanton(ctx, 1.0, r)?;
        }
    }
    mass *= ctx.surface();
    let q = coef.sup_norm();
    Ok(2f64.powf(4.0 - ctx.nf()) * kappa0 * q.powf(2.0 / ctx.two_star()) * mass * mass)
}

/// Analytic tail-norm bound ‖(1-φ_α) v_ε‖_{2⁺}^{2⁺} ≤ ω_N (N(N-2))^{N/2}
/// α^{-N} ε^{N/2}.
pub fn cutoff_tail_norm_bound(ctx: DimensionContext, params: InstantonParams) -> f64 {
    let nf = ctx.nf();
    ctx.omega_n()
        * (nf * (nf - 2.0)).powf(nf / 2.0)
        * params.alpha.powf(-nf)
        * params.eps.powf(nf / 2.0)
}
