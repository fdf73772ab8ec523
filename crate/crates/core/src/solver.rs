//! Numerical search for candidate dual ground states: resolvent application
//! on the radial quadrature backend and on a Cartesian FFT backend with the
//! regularized principal-value multiplier `(|ξ|²-1)/((|ξ|²-1)²+δ²)`, a
//! damped normalized fixed-point iteration on the dual equation
//! `|v|^{2⁺-2} v = A_Q v  ⇔  v = |A_Q v|^{2*-2} A_Q v`, far-field
//! diagnostics, and the N = 3 kernel-comparison probe.
//!
//! Convergence is reported, never guaranteed: the iteration targets saddle
//! points, so a non-converged report is a valid outcome.

use crate::dualvar::{self, Coefficient, DualProblem, DualState};
use crate::error::{Error, Result};
use crate::fundsol::DimensionContext;
use crate::instanton::{cutoff_profile, v_instanton};
use crate::radialops::{
    convolve_at, lp_norm_profile, BilinearTable, Kernel, PanelSpec, RadialGrid,
};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::{Read, Write};
use std::sync::Arc;

/// What the normalized fixed-point iteration needs from a discretization.
pub trait DualBackend {
    fn ctx(&self) -> DimensionContext;
    fn apply_a_q(&self, v: &[f64]) -> Vec<f64>;
    /// ∫ v dx of nodal values.
    fn integral(&self, values: &[f64]) -> f64;

    fn norm_p(&self, values: &[f64], p: f64) -> f64 {
        let powed: Vec<f64> = values.iter().map(|v| v.abs().powf(p)).collect();
        self.integral(&powed).powf(1.0 / p)
    }

    fn quad_a_q(&self, v: &[f64]) -> f64 {
        let av = self.apply_a_q(v);
        let prod: Vec<f64> = v.iter().zip(&av).map(|(a, b)| a * b).collect();
        self.integral(&prod)
    }

    fn state(&self, v: &[f64]) -> DualState {
        let tp = self.ctx().two_plus();
        let av = self.apply_a_q(v);
        let norm_2plus = self.norm_p(v, tp);
        let prod: Vec<f64> = v.iter().zip(&av).map(|(a, b)| a * b).collect();
        let quadform_aq = self.integral(&prod);
        let grad: Vec<f64> = v
            .iter()
            .zip(&av)
            .map(|(x, a)| {
                let nl = if *x == 0.0 {
                    0.0
                } else {
                    x.abs().powf(tp - 2.0) * x
                };
                nl - a
            })
            .collect();
        DualState {
            norm_2plus,
            quadform_aq,
            energy: norm_2plus.powf(tp) / tp - 0.5 * quadform_aq,
            residual: self.norm_p(&grad, tp),
        }
    }
}

impl DualBackend for DualProblem {
    fn ctx(&self) -> DimensionContext {
        DualProblem::ctx(self)
    }
    fn apply_a_q(&self, v: &[f64]) -> Vec<f64> {
        DualProblem::apply_a_q(self, v)
    }
    fn integral(&self, values: &[f64]) -> f64 {
        DualProblem::integral(self, values)
    }
}

/// Iteration controls. The residual is measured in `‖·‖_{2⁺}` against the
/// scale `tol · ‖v‖_{2⁺}^{2⁺-1}`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SolveParams {
    pub max_iter: usize,
    pub tol: f64,
    pub damping: f64,
}

impl Default for SolveParams {
    fn default() -> Self {
        SolveParams {
            max_iter: 500,
            tol: 1e-6,
            damping: 0.5,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub final_state: DualState,
    pub energy: f64,
    pub mp_bound: f64,
    pub converged: bool,
}

pub struct SolveOutcome {
    pub report: SolveReport,
    pub v: Vec<f64>,
}

/// Damped normalized fixed-point iteration: `w = |A_Q v|^{2*-2} A_Q v`,
/// rescaled onto the fiber by its `t`-projection, then blended
/// `v ← (1-θ)v + θw`. Steps that increase the residual retry with a halved
/// blend, so the accepted residual history is nonincreasing; stagnation or
/// `max_iter` produce a truthful non-converged report.
pub fn fixed_point_solve(
    backend: &impl DualBackend,
    init: &[f64],
    params: SolveParams,
) -> Result<SolveOutcome> {
    if !(params.damping > 0.0 && params.damping <= 1.0) {
        return Err(Error::config(format!(
            "damping {} outside (0, 1]",
            params.damping
        )));
    }
    if params.max_iter == 0 {
        return Err(Error::config("max_iter must be at least 1"));
    }
    let ctx = backend.ctx();
    let tp = ctx.two_plus();
    let ts = ctx.two_star();
    let norm0 = backend.norm_p(init, tp);
    if !(norm0 > 0.0) || init.iter().any(|x| !x.is_finite()) {
        return Err(Error::DegenerateInit(
            "zero or non-finite initial iterate".into(),
        ));
    }
    if !(backend.quad_a_q(init) > 0.0) {
        return Err(Error::DegenerateInit(
            "initial iterate has nonpositive quadratic form".into(),
        ));
    }

    // start on the fiber
    let t0 = t_projection(backend, init)?;
    let mut v: Vec<f64> = init.iter().map(|x| t0 * x).collect();
    let mut residual = backend.state(&v).residual;
    let mut history = vec![residual];
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..params.max_iter {
        let scale = params.tol * backend.norm_p(&v, tp).powf(tp - 1.0);
        if residual < scale {
            converged = true;
            break;
        }
        iterations += 1;
        let av = backend.apply_a_q(&v);
        let mut w: Vec<f64> = av
            .iter()
            .map(|a| {
                if *a == 0.0 {
                    0.0
                } else {
                    a.abs().powf(ts - 2.0) * a
                }
            })
            .collect();
        let tw = match t_projection(backend, &w) {
            Ok(t) => t,
            Err(_) => {
                return Ok(SolveOutcome {
                    report: report_from(backend, &v, iterations, history, false),
                    v,
                })
            }
        };
        for x in &mut w {
            *x *= tw;
        }
        // blend, retrying with halved damping if the residual worsens
        let mut theta = params.damping;
        let mut accepted = false;
        for _ in 0..8 {
            let mut cand: Vec<f64> = v
                .iter()
                .zip(&w)
                .map(|(a, b)| (1.0 - theta) * a + theta * b)
                .collect();
            match t_projection(backend, &cand) {
                Ok(t) => cand.iter_mut().for_each(|x| *x *= t),
                Err(_) => break,
            }
            let cand_res = backend.state(&cand).residual;
            if cand_res <= residual {
                v = cand;
                residual = cand_res;
                history.push(residual);
                accepted = true;
                break;
            }
            theta *= 0.5;
        }
        if !accepted {
            break; // stagnation: no damping level improves the residual
        }
    }
    if !converged {
        let scale = params.tol * backend.norm_p(&v, tp).powf(tp - 1.0);
        converged = residual < scale;
    }
    Ok(SolveOutcome {
        report: report_from(backend, &v, iterations, history, converged),
        v,
    })
}

fn t_projection(backend: &impl DualBackend, v: &[f64]) -> Result<f64> {
    let q = backend.quad_a_q(v);
    if !(q > 0.0) {
        return Err(Error::NonpositiveForm(q));
    }
    let tp = backend.ctx().two_plus();
    let n = backend.norm_p(v, tp).powf(tp);
    Ok((n / q).powf(1.0 / (2.0 - tp)))
}

fn report_from(
    backend: &impl DualBackend,
    v: &[f64],
    iterations: usize,
    history: Vec<f64>,
    converged: bool,
) -> SolveReport {
    let state = backend.state(v);
    let nf = backend.ctx().nf();
    let mp_bound = if state.quadform_aq > 0.0 {
        (state.norm_2plus.powi(2) / state.quadform_aq).powf(nf / 2.0) / nf
    } else {
        f64::NAN
    };
    SolveReport {
        iterations,
        residual_history: history,
        energy: state.energy,
        mp_bound,
        final_state: state,
        converged,
    }
}

/// u = Ψ∗(Q^{1/2*} v) and its L^{2*} norm.
pub fn reconstruct_u(problem: &DualProblem, v: &[f64]) -> (Vec<f64>, f64) {
    let ctx = DualProblem::ctx(problem);
    let qv: Vec<f64> = problem
        .grid()
        .nodes()
        .iter()
        .zip(v)
        .map(|(&r, x)| problem.coefficient().pow_dual(ctx, r) * x)
        .collect();
    let u = problem.apply_resolvent(&qv);
    let norm = problem.norm(&u, ctx.two_star());
    (u, norm)
}

/// u(ρ) on radii beyond the grid (far-field evaluation of Ψ∗(Q^{1/2*}v)).
pub fn far_field_profile(problem: &DualProblem, v: &[f64], radii: &[f64]) -> Result<Vec<f64>> {
    let ctx = DualProblem::ctx(problem);
    let qv: Vec<f64> = problem
        .grid()
        .nodes()
        .iter()
        .zip(v)
        .map(|(&r, x)| problem.coefficient().pow_dual(ctx, r) * x)
        .collect();
    convolve_at(problem.grid(), &Kernel::Helmholtz(ctx), &qv, radii)
}

/// Least-squares fit of `u(r)·r^{(N-1)/2}` to `A cos(r + φ₀)` over a radial
/// window.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FarfieldFit {
    pub amplitude: f64,
    pub phase: f64,
    pub rms_error: f64,
    pub rel_rms: f64,
}

pub fn farfield_fit(
    ctx: DimensionContext,
    radii: &[f64],
    u: &[f64],
    window: (f64, f64),
    source_extent: f64,
) -> Result<FarfieldFit> {
    if window.0 < source_extent {
        return Err(Error::Window(format!(
            "window starts at {} inside the source extent {}",
            window.0, source_extent
        )));
    }
    if radii.len() != u.len() {
        return Err(Error::Shape("radii/value length mismatch".into()));
    }
    let mut sc = 0.0;
    let mut ss = 0.0;
    let mut scc = 0.0;
    let mut sss = 0.0;
    let mut ssc = 0.0;
    let pow = (ctx.nf() - 1.0) / 2.0;
    let mut ys = Vec::new();
    let mut cs = Vec::new();
    let mut sn = Vec::new();
    for (&r, &val) in radii.iter().zip(u) {
        if r < window.0 || r > window.1 {
            continue;
        }
        let y = val * r.powf(pow);
        let c = r.cos();
        let s = r.sin();
        sc += y * c;
        ss += y * s;
        scc += c * c;
        sss += s * s;
        ssc += s * c;
        ys.push(y);
        cs.push(c);
        sn.push(s);
    }
    if ys.len() < 8 {
        return Err(Error::Window("too few samples in the fit window".into()));
    }
    // normal equations for y ≈ a cos r + b sin r
    let det = scc * sss - ssc * ssc;
    if det.abs() < 1e-14 {
        return Err(Error::Numeric("degenerate far-field fit".into()));
    }
    let a = (sc * sss - ss * ssc) / det;
    let b = (ss * scc - sc * ssc) / det;
    let mut rss = 0.0;
    for i in 0..ys.len() {
        let fit = a * cs[i] + b * sn[i];
        rss += (ys[i] - fit) * (ys[i] - fit);
    }
    let rms = (rss / ys.len() as f64).sqrt();
    let amplitude = (a * a + b * b).sqrt();
    Ok(FarfieldFit {
        amplitude,
        phase: (-b).atan2(a),
        rms_error: rms,
        rel_rms: rms / amplitude.max(1e-300),
    })
}

/// One ε-entry of the N = 3 comparison probe.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct N3ProbeRow {
    pub eps: f64,
    pub mp_bound: f64,
    pub excess: f64,
    pub psi_form: f64,
    pub lambda_form: f64,
    pub margin: f64,
}

/// Tabulated evidence for the N = 3 equality/nonexistence picture: the
/// mountain-pass bounds of the cutoff instanton family approach L_Q* from
/// above, while the strict kernel inequality (Ψ-form < Λ-form on positive
/// functions) holds with quantified margin.
#[derive(Debug, Clone, Serialize)]
pub struct N3Report {
    pub l_star: f64,
    pub rows: Vec<N3ProbeRow>,
    pub trend_decreasing: bool,
    pub never_below_l_star: bool,
    pub v1_psi_form: f64,
    pub v1_lambda_form: f64,
    pub v1_margin: f64,
    pub v1_error_bar: f64,
    pub pointwise_max_ratio: f64,
}

/// Run the probe for a bounded nonnegative coefficient (radial, maximum at
/// the origin). `eps_list` should span a few decades toward 0.
pub fn n3_nonexistence_probe(
    coef: &Coefficient,
    eps_list: &[f64],
    alpha: f64,
) -> Result<N3Report> {
    let ctx = DimensionContext::new(3)?;
    if eps_list.is_empty() {
        return Err(Error::config("empty eps list"));
    }
    let l_star = dualvar::l_q_star(ctx, coef)?;
    let eps_lo = eps_list.iter().cloned().fold(f64::INFINITY, f64::min);

    let mk_breaks = |r_min: f64, r_max: f64, ppd: f64| -> Vec<f64> {
        let n = ((r_max / r_min).log10() * ppd).ceil().max(1.0) as usize;
        (0..=n)
            .map(|i| r_min * (r_max / r_min).powf(i as f64 / n as f64))
            .collect()
    };
    let grid = Arc::new(RadialGrid::from_breaks(
        ctx,
        mk_breaks(1e-3 * eps_lo.sqrt(), 2.0 * alpha, 5.0),
        14,
    )?);
    let psi_table = BilinearTable::build(&grid, &Kernel::Helmholtz(ctx));
    let lam_table = BilinearTable::build(&grid, &Kernel::Newton(ctx));

    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let c2 = coef.clone();
        let c3 = coef.clone();
        let w = move |r: f64| cutoff_profile(r / alpha) * v_instanton(ctx, eps, r).unwrap();
        let psi_form = psi_table.bilinear(
            move |r| c2.pow_dual(ctx, r) * w(r),
            move |r| c3.pow_dual(ctx, r) * w(r),
        );
        let c4 = coef.clone();
        let c5 = coef.clone();
        let lambda_form = lam_table.bilinear(
            move |r| c4.pow_dual(ctx, r) * w(r),
            move |r| c5.pow_dual(ctx, r) * w(r),
        );
        let norm = lp_norm_profile(
            ctx,
            w,
            ctx.two_plus(),
            grid.breaks(),
            grid.nodes_per_panel(),
        )?;
        let mp_bound = if psi_form > 0.0 {
            (norm.powi(2) / psi_form).powf(1.5) / 3.0
        } else {
            f64::INFINITY
        };
        rows.push(N3ProbeRow {
            eps,
            mp_bound,
            excess: mp_bound - l_star,
            psi_form,
            lambda_form,
            margin: lambda_form - psi_form,
        });
    }
    // decreasing ε should drive the bound down toward L*
    rows.sort_by(|a, b| b.eps.partial_cmp(&a.eps).unwrap());
    let trend_decreasing = rows
        .windows(2)
        .all(|p| p[1].mp_bound <= p[0].mp_bound + 1e-12);
    let never_below_l_star = rows.iter().all(|r| r.mp_bound >= l_star - 1e-6 * l_star);

    // strict kernel inequality for the uncut instanton v₁, with a
    // refinement-based error bar
    let probe_v1 = |ppd: f64, npp: usize, r_max: f64| -> Result<(f64, f64)> {
        let g = Arc::new(RadialGrid::new(
            ctx,
            &PanelSpec {
                r_min: 1e-4,
                r_max,
                nodes_per_panel: npp,
                panels_per_decade: ppd,
                oscillation_cap: Some(PI / 4.0),
            },
        )?);
        let v1 = move |r: f64| v_instanton(ctx, 1.0, r).unwrap();
        let pt = BilinearTable::build(&g, &Kernel::Helmholtz(ctx));
        let lt = BilinearTable::build(&g, &Kernel::Newton(ctx));
        Ok((pt.bilinear(v1, v1), lt.bilinear(v1, v1)))
    };
    let (psi_f, lam_f) = probe_v1(5.0, 12, 60.0)?;
    let (psi_c, lam_c) = probe_v1(4.0, 9, 40.0)?;
    let v1_error_bar = (psi_f - psi_c).abs() + (lam_f - lam_c).abs();

    // pointwise |Ψ| ≤ Λ on a log sample
    let mut max_ratio = 0.0f64;
    for i in 0..10_000 {
        let r = 1e-4 * (1e6f64).powf(i as f64 / 9999.0);
        let ratio = crate::fundsol::psi(ctx, r)?.abs() / crate::fundsol::lambda(ctx, r)?;
        max_ratio = max_ratio.max(ratio);
    }

    Ok(N3Report {
        l_star,
        rows,
        trend_decreasing,
        never_below_l_star,
        v1_psi_form: psi_f,
        v1_lambda_form: lam_f,
        v1_margin: lam_f - psi_f,
        v1_error_bar,
        pointwise_max_ratio: max_ratio,
    })
}

// ---------------------------------------------------------------------------
// Cartesian FFT backend
// ---------------------------------------------------------------------------

/// Real field sampled on a uniform grid over [-L, L)^N, N ∈ {3, 4}, with a
/// power-of-two point count per axis.
#[derive(Debug, Clone)]
pub struct CartesianField {
    ctx: DimensionContext,
    half_width: f64,
    m: usize,
    data: Vec<f64>,
}

impl CartesianField {
    pub fn sample(
        ctx: DimensionContext,
        half_width: f64,
        m: usize,
        f: impl Fn(&[f64]) -> f64,
    ) -> Result<Self> {
        if !(ctx.n() == 3 || ctx.n() == 4) {
            return Err(Error::config("the Cartesian backend supports N in {3, 4}"));
        }
        if m < 16 || !m.is_power_of_two() {
            return Err(Error::config("points per axis must be a power of two >= 16"));
        }
        if !(half_width > 0.0) {
            return Err(Error::config("box half-width must be positive"));
        }
        let n = ctx.n() as usize;
        let total = m.pow(n as u32);
        let h = 2.0 * half_width / m as f64;
        let mut data = vec![0.0; total];
        let mut coords = vec![0usize; n];
        for (idx, slot) in data.iter_mut().enumerate() {
            let mut rem = idx;
            for c in coords.iter_mut() {
                *c = rem % m;
                rem /= m;
            }
            let x: Vec<f64> = coords
                .iter()
                .map(|&k| -half_width + k as f64 * h)
                .collect();
            *slot = f(&x);
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("non-finite field samples"));
        }
        Ok(CartesianField {
            ctx,
            half_width,
            m,
            data,
        })
    }

    pub fn ctx(&self) -> DimensionContext {
        self.ctx
    }
    pub fn half_width(&self) -> f64 {
        self.half_width
    }
    pub fn points_per_axis(&self) -> usize {
        self.m
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.m as f64
    }

    /// Cell-volume weighted integral over the box.
    pub fn integral(&self, values: &[f64]) -> f64 {
        let h = self.spacing();
        let cell = h.powi(self.ctx.n() as i32);
        values.iter().sum::<f64>() * cell
    }

    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        if !(p >= 1.0) {
            return Err(Error::domain("p >= 1 required"));
        }
        let powed: Vec<f64> = self.data.iter().map(|v| v.abs().powf(p)).collect();
        Ok(self.integral(&powed).powf(1.0 / p))
    }

    /// Values along the positive x-axis (excluding the origin sample).
    pub fn axis_profile(&self) -> Vec<(f64, f64)> {
        let h = self.spacing();
        let n = self.ctx.n() as usize;
        let origin = self.m / 2; // index where the coordinate is 0
        let mut base = 0usize;
        for a in 1..n {
            base += origin * self.m.pow(a as u32);
        }
        (origin + 1..self.m)
            .map(|i| {
                let x = -self.half_width + i as f64 * h;
                (x, self.data[base + i])
            })
            .collect()
    }
}

/// Frequency-space application of the Helmholtz principal-value multiplier
/// with Lorentzian regularization δ = c·π/L tied to the frequency spacing.
pub struct FftResolvent {
    ctx: DimensionContext,
    half_width: f64,
    m: usize,
    delta: f64,
    /// set when frequency bins land within δ/10 of the unit sphere
    pub resolution_warning: bool,
}

impl FftResolvent {
    pub fn new(
        ctx: DimensionContext,
        half_width: f64,
        m: usize,
        delta_coef: f64,
    ) -> Result<Self> {
        if !(ctx.n() == 3 || ctx.n() == 4) {
            return Err(Error::config("the Cartesian backend supports N in {3, 4}"));
        }
        if m < 16 || !m.is_power_of_two() {
            return Err(Error::config("points per axis must be a power of two >= 16"));
        }
        let delta = delta_coef * PI / half_width;
        if !(delta > 0.0) {
            return Err(Error::config("delta must be positive"));
        }
        // scan frequency magnitudes near the unit sphere (3 axes suffice to
        // find the closest lattice magnitude: use the radial set |k| dxi)
        let dxi = PI / half_width;
        let mut warning = false;
        let reach = ((1.5 / dxi).ceil() as i64).max(2);
        for k0 in 0..=reach {
            for k1 in 0..=reach {
                for k2 in 0..=reach {
                    let xi2 = ((k0 * k0 + k1 * k1 + k2 * k2) as f64) * dxi * dxi;
                    if (xi2 - 1.0).abs() < delta / 10.0 {
                        warning = true;
                    }
                }
            }
        }
        Ok(FftResolvent {
            ctx,
            half_width,
            m,
            delta,
            resolution_warning: warning,
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Regularized real-part multiplier (|ξ|²-1)/((|ξ|²-1)²+δ²).
    pub fn multiplier(&self, xi_sq: f64) -> f64 {
        let d = xi_sq - 1.0;
        d / (d * d + self.delta * self.delta)
    }

    /// Ψ∗f through the regularized multiplier.
    pub fn apply(&self, field: &CartesianField) -> Result<CartesianField> {
        self.apply_with(field, |xi2| self.multiplier(xi2))
    }

    /// Laplace cross-check: multiplier 1/|ξ|² with the zero mode excluded.
    pub fn apply_laplace(&self, field: &CartesianField) -> Result<CartesianField> {
        self.apply_with(field, |xi2| if xi2 == 0.0 { 0.0 } else { 1.0 / xi2 })
    }

    fn apply_with(
        &self,
        field: &CartesianField,
        multiplier: impl Fn(f64) -> f64,
    ) -> Result<CartesianField> {
        if field.m != self.m
            || field.ctx != self.ctx
            || (field.half_width - self.half_width).abs() > 1e-12
        {
            return Err(Error::config(
                "field does not match the resolvent discretization",
            ));
        }
        let n = self.ctx.n() as usize;
        let m = self.m;
        let mut buf: Vec<Complex64> = field
            .data
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        fftn(&mut buf, m, n, false);
        let dxi = PI / self.half_width;
        let freq = |k: usize| -> f64 {
            let signed = if k < m / 2 {
                k as i64
            } else {
                k as i64 - m as i64
            };
            signed as f64 * dxi
        };
        let mut coords = vec![0usize; n];
        for (idx, c) in buf.iter_mut().enumerate() {
            let mut rem = idx;
            let mut xi2 = 0.0;
            for slot in coords.iter_mut() {
                *slot = rem % m;
                rem /= m;
                let f = freq(*slot);
                xi2 += f * f;
            }
            *c *= multiplier(xi2);
        }
        fftn(&mut buf, m, n, true);
        let data: Vec<f64> = buf.iter().map(|c| c.re).collect();
        Ok(CartesianField {
            ctx: self.ctx,
            half_width: self.half_width,
            m: self.m,
            data,
        })
    }
}

/// In-place N-dimensional FFT by axis sweeps; `inverse` includes the 1/M^N
/// normalization.
pub fn fftn(data: &mut [Complex64], m: usize, ndim: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let fft = if inverse {
        planner.plan_fft_inverse(m)
    } else {
        planner.plan_fft_forward(m)
    };
    let total = m.pow(ndim as u32);
    assert_eq!(data.len(), total);
    let mut scratch = vec![Complex64::new(0.0, 0.0); m];
    for axis in 0..ndim {
        let stride = m.pow(axis as u32);
        let block = stride * m;
        for base in (0..total).step_by(block) {
            for offset in 0..stride {
                let start = base + offset;
                for k in 0..m {
                    scratch[k] = data[start + k * stride];
                }
                fft.process(&mut scratch);
                for k in 0..m {
                    data[start + k * stride] = scratch[k];
                }
            }
        }
    }
    if inverse {
        let norm = 1.0 / total as f64;
        for c in data.iter_mut() {
            *c *= norm;
        }
    }
}

// ---------------------------------------------------------------------------
// Checkpoints: one-line JSON header + little-endian f64 dump
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub kind: String,
    pub n: u32,
    pub len: usize,
    pub meta: serde_json::Value,
}

pub fn save_checkpoint(
    path: &std::path::Path,
    header: &CheckpointHeader,
    data: &[f64],
) -> Result<()> {
    if header.len != data.len() {
        return Err(Error::Shape("header length disagrees with data".into()));
    }
    let mut file = std::fs::File::create(path)
        .map_err(|e| Error::config(format!("cannot create {}: {e}", path.display())))?;
    let mut doc = serde_json::to_string(header).map_err(|e| Error::Numeric(e.to_string()))?;
    doc.push('\n');
    file.write_all(doc.as_bytes())
        .and_then(|_| {
            let mut bytes = Vec::with_capacity(data.len() * 8);
            for v in data {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
            file.write_all(&bytes)
        })
        .map_err(|e| Error::config(format!("write failed: {e}")))?;
    Ok(())
}

pub fn load_checkpoint(path: &std::path::Path) -> Result<(CheckpointHeader, Vec<f64>)> {
    let mut file = std::fs::File::open(path)
        .map_err(|e| Error::config(format!("cannot open {}: {e}", path.display())))?;
    let mut raw = Vec::new();
    file.read_to_end(&mut raw)
        .map_err(|e| Error::config(format!("read failed: {e}")))?;
    let newline = raw
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::config("missing checkpoint header line"))?;
    let header: CheckpointHeader = serde_json::from_slice(&raw[..newline])
        .map_err(|e| Error::config(format!("bad checkpoint header: {e}")))?;
    let body = &raw[newline + 1..];
    if body.len() != header.len * 8 {
        return Err(Error::Shape(format!(
            "checkpoint body has {} bytes, expected {}",
            body.len(),
            header.len * 8
        )));
    }
    let data: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((header, data))
}
