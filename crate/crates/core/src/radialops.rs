//! Radial grids and quadrature: panel Gauss-Legendre rules with log
//! refinement toward the origin, `L^p` norms with the surface factor kept
//! outside the node weights, Newton potentials of radial functions, and
//! kernel quadratic forms `∫∫ f(x) K(|x-y|) g(y) dx dy` reduced to a double
//! radial integral through angular averaging.
//!
//! This module is the brute-force oracle layer: everything here is plain
//! quadrature with controlled refinement, no spectral tricks.

use crate::error::{Error, Result};
use crate::fundsol::{self, DimensionContext};
use rayon::prelude::*;
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

const MAX_GAUSS_N: usize = 32;

/// Gauss-Legendre rule on [-1, 1], cached per node count.
pub fn gauss_rule(n: usize) -> &'static (Vec<f64>, Vec<f64>) {
    static RULES: OnceLock<Vec<(Vec<f64>, Vec<f64>)>> = OnceLock::new();
    let rules = RULES.get_or_init(|| (0..=MAX_GAUSS_N).map(compute_gauss).collect());
    &rules[n.min(MAX_GAUSS_N)]
}

fn compute_gauss(n: usize) -> (Vec<f64>, Vec<f64>) {
    if n == 0 {
        return (vec![], vec![]);
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for k in 0..n {
        // Newton iteration on P_n from the Chebyshev-like initial guess
        let mut x = (PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        nodes[n - 1 - k] = x;
        weights[n - 1 - k] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for m in 2..=n {
        let mf = m as f64;
        let p2 = ((2.0 * mf - 1.0) * x * p1 - (mf - 1.0) * p0) / mf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Grid construction parameters. Panels are geometric from `r_min` up to
/// `min(1, r_max)` and capped in length beyond `r = 1` when an oscillation
/// cap is set (`π/4` keeps ≥ 8 points per Helmholtz oscillation period).
#[derive(Debug, Clone)]
pub struct PanelSpec {
    pub r_min: f64,
    pub r_max: f64,
    pub nodes_per_panel: usize,
    pub panels_per_decade: f64,
    pub oscillation_cap: Option<f64>,
}

impl PanelSpec {
    /// Spec for grids that feed oscillatory Helmholtz kernels.
    pub fn for_kernels(r_min: f64, r_max: f64) -> Self {
        PanelSpec {
            r_min,
            r_max,
            nodes_per_panel: 12,
            panels_per_decade: 5.0,
            oscillation_cap: Some(PI / 4.0),
        }
    }

    /// Purely geometric spec, adequate for norms and monotone kernels.
    pub fn geometric(r_min: f64, r_max: f64) -> Self {
        PanelSpec {
            r_min,
            r_max,
            nodes_per_panel: 12,
            panels_per_decade: 5.0,
            oscillation_cap: None,
        }
    }

    fn breakpoints(&self) -> Result<Vec<f64>> {
        if !(self.r_min > 0.0 && self.r_max > self.r_min) {
            return Err(Error::config(format!(
                "bad radial range ({}, {})",
                self.r_min, self.r_max
            )));
        }
        if self.nodes_per_panel < 2 || self.nodes_per_panel > MAX_GAUSS_N {
            return Err(Error::config("nodes_per_panel outside [2, 32]"));
        }
        if !(self.panels_per_decade > 0.0) {
            return Err(Error::config("panels_per_decade must be positive"));
        }
        let mut breaks = Vec::new();
        let geom_end = self.r_max.min(1.0);
        let decades = (geom_end / self.r_min).log10();
        let n_geom = (decades * self.panels_per_decade).ceil().max(1.0) as usize;
        for i in 0..=n_geom {
            breaks.push(self.r_min * (geom_end / self.r_min).powf(i as f64 / n_geom as f64));
        }
        if self.r_max > 1.0 {
            match self.oscillation_cap {
                Some(cap) => {
                    let n_lin = ((self.r_max - geom_end) / cap).ceil().max(1.0) as usize;
                    for i in 1..=n_lin {
                        breaks.push(geom_end + (self.r_max - geom_end) * i as f64 / n_lin as f64);
                    }
                }
                None => {
                    let decades = (self.r_max / geom_end).log10();
                    let n2 = (decades * self.panels_per_decade).ceil().max(1.0) as usize;
                    for i in 1..=n2 {
                        breaks.push(geom_end * (self.r_max / geom_end).powf(i as f64 / n2 as f64));
                    }
                }
            }
        }
        Ok(breaks)
    }
}

/// Quadrature nodes and weights on (0, R], organized in panels. The
/// `r^{N-1}` surface factor is kept outside the weights so the same grid
/// serves different integrands.
#[derive(Debug, Clone)]
pub struct RadialGrid {
    ctx: DimensionContext,
    breaks: Vec<f64>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    nodes_per_panel: usize,
}

impl RadialGrid {
    pub fn new(ctx: DimensionContext, spec: &PanelSpec) -> Result<Self> {
        Self::from_breaks(ctx, spec.breakpoints()?, spec.nodes_per_panel)
    }

    pub fn from_breaks(
        ctx: DimensionContext,
        breaks: Vec<f64>,
        nodes_per_panel: usize,
    ) -> Result<Self> {
        if breaks.len() < 2 {
            return Err(Error::config("need at least one panel"));
        }
        if nodes_per_panel < 2 || nodes_per_panel > MAX_GAUSS_N {
            return Err(Error::config("nodes_per_panel outside [2, 32]"));
        }
        for pair in breaks.windows(2) {
            if !(pair[1] > pair[0]) || pair[0] < 0.0 {
                return Err(Error::config("breakpoints must be increasing and nonnegative"));
            }
        }
        let (gx, gw) = gauss_rule(nodes_per_panel);
        let mut nodes = Vec::with_capacity((breaks.len() - 1) * nodes_per_panel);
        let mut weights = Vec::with_capacity(nodes.capacity());
        for pair in breaks.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            for (x, w) in gx.iter().zip(gw) {
                nodes.push(0.5 * (b - a) * x + 0.5 * (a + b));
                weights.push(0.5 * (b - a) * w);
            }
        }
        Ok(RadialGrid {
            ctx,
            breaks,
            nodes,
            weights,
            nodes_per_panel,
        })
    }

    pub fn ctx(&self) -> DimensionContext {
        self.ctx
    }
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }
    pub fn len(&self) -> usize {
        self.nodes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
    pub fn nodes_per_panel(&self) -> usize {
        self.nodes_per_panel
    }
    pub fn n_panels(&self) -> usize {
        self.breaks.len() - 1
    }
    pub fn r_max(&self) -> f64 {
        *self.breaks.last().unwrap()
    }

    fn panel_of(&self, idx: usize) -> usize {
        idx / self.nodes_per_panel
    }

    /// Plain ∫ v(r) dr with the panel rule.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        values.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }

    /// Volume integral N ω_N ∫ v(r) r^{N-1} dr.
    pub fn volume_integral(&self, values: &[f64]) -> f64 {
        let nm1 = self.ctx.nf() - 1.0;
        let s: f64 = values
            .iter()
            .zip(self.nodes.iter().zip(&self.weights))
            .map(|(v, (r, w))| v * r.powf(nm1) * w)
            .sum();
        self.ctx.surface() * s
    }
}

/// Barycentric Lagrange interpolation from one panel's Gauss nodes.
fn panel_interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..n {
        let mut lam = 1.0;
        for j in 0..n {
            if i != j {
                lam /= xs[i] - xs[j];
            }
        }
        let d = x - xs[i];
        if d == 0.0 {
            return ys[i];
        }
        let c = lam / d;
        num += c * ys[i];
        den += c;
    }
    num / den
}

/// Sampled radial profile on a shared grid.
#[derive(Debug, Clone)]
pub struct RadialFunction {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
}

impl RadialFunction {
    pub fn sample(grid: &Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().iter().map(|&r| f(r)).collect();
        RadialFunction {
            grid: Arc::clone(grid),
            values,
        }
    }

    pub fn from_values(grid: &Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Shape(format!(
                "{} values for a grid with {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("non-finite sample values"));
        }
        Ok(RadialFunction {
            grid: Arc::clone(grid),
            values,
        })
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Interpolated value at radius `r` (barycentric within the home panel),
    /// zero outside the grid extent.
    pub fn eval(&self, r: f64) -> f64 {
        let breaks = self.grid.breaks();
        if r <= breaks[0] || r >= *breaks.last().unwrap() {
            return 0.0;
        }
        let p = match breaks.binary_search_by(|b| b.partial_cmp(&r).unwrap()) {
            Ok(i) => i.min(breaks.len() - 2),
            Err(i) => i - 1,
        };
        let npp = self.grid.nodes_per_panel();
        let xs = &self.grid.nodes()[p * npp..(p + 1) * npp];
        let ys = &self.values[p * npp..(p + 1) * npp];
        panel_interp(xs, ys, r)
    }

    fn same_grid(&self, other: &RadialFunction) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || self.grid.nodes() == other.grid.nodes() {
            Ok(())
        } else {
            Err(Error::Shape("functions live on different grids".into()))
        }
    }
}

/// Convenience constructor matching the grid contract: Gauss panels whose
/// rule integrates r^k exactly for k ≤ 2·nodes_per_panel - 1 per panel.
pub fn make_grid(ctx: DimensionContext, r_max: f64, spec: Option<PanelSpec>) -> Result<RadialGrid> {
    let spec = spec.unwrap_or_else(|| PanelSpec::for_kernels(1e-6 * r_max.min(1.0), r_max));
    if (spec.r_max - r_max).abs() > 1e-12 * r_max {
        return Err(Error::config("spec r_max disagrees with requested r_max"));
    }
    RadialGrid::new(ctx, &spec)
}

/// (N ω_N ∫ |f|^p r^{N-1} dr)^{1/p}.
pub fn lp_norm(f: &RadialFunction, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::domain(format!("lp_norm requires p >= 1, got {p}")));
    }
    let powed: Vec<f64> = f.values.iter().map(|v| v.abs().powf(p)).collect();
    Ok(f.grid.volume_integral(&powed).powf(1.0 / p))
}

/// Closure-based L^p norm over explicit breakpoints (used where sampled
/// grids would need an impractical extent).
pub fn lp_norm_profile(
    ctx: DimensionContext,
    f: impl Fn(f64) -> f64,
    p: f64,
    breaks: &[f64],
    nodes_per_panel: usize,
) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::domain("p >= 1 required"));
    }
    let (gx, gw) = gauss_rule(nodes_per_panel);
    let nm1 = ctx.nf() - 1.0;
    let mut total = 0.0;
    for pair in breaks.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        for (x, w) in gx.iter().zip(gw) {
            let r = 0.5 * (b - a) * x + 0.5 * (a + b);
            total += 0.5 * (b - a) * w * f(r).abs().powf(p) * r.powf(nm1);
        }
    }
    Ok((ctx.surface() * total).powf(1.0 / p))
}

/// Newton potential with a tail-decay warning flag.
#[derive(Debug, Clone)]
pub struct NewtonPotential {
    pub field: RadialFunction,
    pub tail_warning: bool,
}

/// (Λ∗f)(r) = N ω_N ∫ s^{N-1} f(s) Λ(max(r,s)) ds at every grid node. The
/// kinked s-panel containing the target node is re-integrated against the
/// panel interpolant of `f`.
pub fn newton_potential(f: &RadialFunction) -> Result<NewtonPotential> {
    let grid = f.grid.as_ref();
    let ctx = grid.ctx();
    let nm1 = ctx.nf() - 1.0;
    let npp = grid.nodes_per_panel();
    let n_panels = grid.n_panels();
    let (gx, gw) = gauss_rule(npp);

    // per-panel plain contributions to the mass ∫ s^{N-1} f and the outer
    // integral ∫ s^{N-1} Λ(s) f
    let mut panel_mass = vec![0.0; n_panels];
    let mut panel_outer = vec![0.0; n_panels];
    for p in 0..n_panels {
        for k in 0..npp {
            let idx = p * npp + k;
            let s = grid.nodes[idx];
            let w = grid.weights[idx];
            let m = w * s.powf(nm1) * f.values[idx];
            panel_mass[p] += m;
            panel_outer[p] += m * fundsol::lambda(ctx, s)?;
        }
    }
    let mut prefix_mass = vec![0.0; n_panels + 1];
    let mut suffix_outer = vec![0.0; n_panels + 1];
    for p in 0..n_panels {
        prefix_mass[p + 1] = prefix_mass[p] + panel_mass[p];
    }
    for p in (0..n_panels).rev() {
        suffix_outer[p] = suffix_outer[p + 1] + panel_outer[p];
    }

    let mut out = vec![0.0; grid.len()];
    for i in 0..grid.len() {
        let r = grid.nodes[i];
        let p = grid.panel_of(i);
        let (a, b) = (grid.breaks[p], grid.breaks[p + 1]);
        let xs = &grid.nodes[p * npp..(p + 1) * npp];
        let ys = &f.values[p * npp..(p + 1) * npp];
        // split the home panel at s = r, integrate both halves against the
        // panel interpolant
        let mut inner_part = 0.0;
        let mut outer_part = 0.0;
        for (x, w) in gx.iter().zip(gw) {
            let s_lo = 0.5 * (r - a) * x + 0.5 * (a + r);
            let val_lo = panel_interp(xs, ys, s_lo);
            inner_part += 0.5 * (r - a) * w * s_lo.powf(nm1) * val_lo;
            let s_hi = 0.5 * (b - r) * x + 0.5 * (r + b);
            let val_hi = panel_interp(xs, ys, s_hi);
            outer_part += 0.5 * (b - r) * w * s_hi.powf(nm1) * val_hi * fundsol::lambda(ctx, s_hi)?;
        }
        let mass_inside = prefix_mass[p] + inner_part;
        let outer = suffix_outer[p + 1] + outer_part;
        out[i] = ctx.surface() * (fundsol::lambda(ctx, r)? * mass_inside + outer);
    }

    let tail_warning = tail_decay_warning(grid, &f.values);
    Ok(NewtonPotential {
        field: RadialFunction::from_values(&f.grid, out)?,
        tail_warning,
    })
}

// |f| should fall at least like r^{-s}, s > 2, over the last decade;
// identically-zero tails are fine.
fn tail_decay_warning(grid: &RadialGrid, values: &[f64]) -> bool {
    let r_hi = grid.r_max();
    let r_mid = r_hi / (10.0f64).sqrt();
    let r_lo = r_hi / 10.0;
    let rms = |lo: f64, hi: f64| -> f64 {
        let mut s = 0.0;
        let mut c = 0usize;
        for (r, v) in grid.nodes().iter().zip(values) {
            if *r >= lo && *r < hi {
                s += v * v;
                c += 1;
            }
        }
        if c == 0 {
            0.0
        } else {
            (s / c as f64).sqrt()
        }
    };
    let lo = rms(r_lo, r_mid);
    let hi = rms(r_mid, r_hi);
    if hi == 0.0 {
        return false;
    }
    if lo == 0.0 {
        return true;
    }
    // |f| ~ r^{-s}  =>  s = log(lo/hi)/log(sqrt(10))
    let s_est = (lo / hi).ln() / (10.0f64).sqrt().ln();
    s_est <= 2.05
}

/// Evaluable radial convolution kernel with regime-switching evaluation.
#[derive(Debug, Clone, Copy)]
pub enum Kernel {
    /// Ψ, the real standing-wave Helmholtz kernel.
    Helmholtz(DimensionContext),
    /// Λ, the Newton kernel.
    Newton(DimensionContext),
    /// |Ψ| (used by the N = 3 comparison).
    HelmholtzAbs(DimensionContext),
    /// Ψ - Λ, evaluated cancellation-free.
    HelmholtzMinusNewton(DimensionContext),
    /// Constant 1 (surface-measure checks).
    Unit,
}

impl Kernel {
    pub fn eval(&self, w: f64) -> f64 {
        match self {
            Kernel::Helmholtz(c) => fundsol::psi(*c, w).expect("w > 0"),
            Kernel::Newton(c) => fundsol::lambda(*c, w).expect("w > 0"),
            Kernel::HelmholtzAbs(c) => fundsol::psi(*c, w).expect("w > 0").abs(),
            Kernel::HelmholtzMinusNewton(c) => fundsol::psi_minus_lambda(*c, w).expect("w > 0"),
            Kernel::Unit => 1.0,
        }
    }

    fn oscillatory(&self) -> bool {
        matches!(
            self,
            Kernel::Helmholtz(_) | Kernel::HelmholtzAbs(_) | Kernel::HelmholtzMinusNewton(_)
        )
    }
}

/// |S^{N-2}| in the angular reduction.
fn sphere_measure_nm2(ctx: DimensionContext) -> f64 {
    let half = (ctx.nf() - 1.0) / 2.0;
    2.0 * PI.powf(half) / crate::specfun::gamma(half).expect("half > 0")
}

/// Surface integral over the unit sphere of `ω ↦ K(|r e₁ - s ω|)`:
/// `|S^{N-2}| ∫₀^π K(√(r² + s² - 2rs cos θ)) sin^{N-2}θ dθ`.
///
/// Panels are geometrically refined toward θ = 0 (where the kernel argument
/// is minimal and the coincidence singularity sits when r ≈ s) and, for
/// oscillatory kernels, subdivided so the kernel argument advances by at
/// most ~1.2 per panel.
pub fn angular_average(kernel: &Kernel, ctx: DimensionContext, r: f64, s: f64) -> Result<f64> {
    if !(r > 0.0 && s > 0.0) {
        return Err(Error::domain(format!(
            "angular_average requires r, s > 0, got ({r}, {s})"
        )));
    }
    Ok(angular_average_unchecked(kernel, ctx, r, s))
}

fn angular_average_unchecked(kernel: &Kernel, ctx: DimensionContext, r: f64, s: f64) -> f64 {
    let npow = ctx.nf() - 2.0;
    // boundary-layer scale of the integrand near θ = 0
    let theta_star = ((r - s).abs() / (r * s).sqrt()).max(1e-9);
    let j = ((4.0 * PI / theta_star).log2().ceil() as i32).clamp(4, 44) as u32;
    let mut breaks = Vec::with_capacity(j as usize + 2);
    breaks.push(0.0);
    for k in (1..=j).rev() {
        breaks.push(PI * 0.5f64.powi(k as i32));
    }
    breaks.push(PI);

    // cancellation-free form of |r e1 - s ω|: (r-s)² + 4 r s sin²(θ/2)
    let warg = |theta: f64| {
        let sh = (0.5 * theta).sin();
        ((r - s) * (r - s) + 4.0 * r * s * sh * sh).sqrt().max(1e-290)
    };
    let (gx, gw) = gauss_rule(16);
    let oscillatory = kernel.oscillatory();
    let mut total = 0.0;
    for pair in breaks.windows(2) {
        let (mut a, b) = (pair[0], pair[1]);
        let nsub = if oscillatory {
            ((warg(b) - warg(a)) / 1.2).ceil().max(1.0) as usize
        } else {
            1
        };
        let step = (b - a) / nsub as f64;
        for _ in 0..nsub {
            let bb = a + step;
            for (x, w) in gx.iter().zip(gw) {
                let theta = 0.5 * step * x + 0.5 * (a + bb);
                let sinp = if npow == 1.0 {
                    theta.sin()
                } else {
                    theta.sin().powf(npow)
                };
                total += 0.5 * step * w * kernel.eval(warg(theta)) * sinp;
            }
            a = bb;
        }
    }
    sphere_measure_nm2(ctx) * total
}

fn angular_matrix(grid: &RadialGrid, kernel: &Kernel) -> Vec<f64> {
    let n = grid.len();
    let ctx = grid.ctx();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let vals: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| angular_average_unchecked(kernel, ctx, grid.nodes[i], grid.nodes[j]))
        .collect();
    let mut aa = vec![0.0; n * n];
    for (&(i, j), &v) in pairs.iter().zip(&vals) {
        aa[i * n + j] = v;
        aa[j * n + i] = v;
    }
    aa
}

/// Bilinear form `∫∫ f(x) K(|x-y|) g(y) dy dx` of sampled radial functions:
/// `N ω_N ∫∫ f(r) g(s) r^{N-1} s^{N-1} A_K(r,s) ds dr`, with the diagonal
/// panels re-integrated over triangles to absorb the kink of the angular
/// average across r = s.
pub fn quadform(f: &RadialFunction, g: &RadialFunction, kernel: &Kernel) -> Result<f64> {
    f.same_grid(g)?;
    let grid = f.grid.as_ref();
    let ctx = grid.ctx();
    let n = grid.len();
    let nm1 = ctx.nf() - 1.0;
    let aa = angular_matrix(grid, kernel);

    let fw: Vec<f64> = (0..n)
        .map(|i| f.values[i] * grid.nodes[i].powf(nm1) * grid.weights[i])
        .collect();
    let gv: Vec<f64> = (0..n)
        .map(|j| g.values[j] * grid.nodes[j].powf(nm1) * grid.weights[j])
        .collect();
    let mut total = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            row += aa[i * n + j] * gv[j];
        }
        total += fw[i] * row;
    }

    // diagonal-panel correction: replace the product rule on P×P by two
    // triangle-mapped rules using the panel interpolants of f and g
    let npp = grid.nodes_per_panel();
    let (gx, gw) = gauss_rule(npp);
    let correction: f64 = (0..grid.n_panels())
        .into_par_iter()
        .map(|p| {
            let (a, b) = (grid.breaks[p], grid.breaks[p + 1]);
            let xs = &grid.nodes[p * npp..(p + 1) * npp];
            let fy = &f.values[p * npp..(p + 1) * npp];
            let gy = &g.values[p * npp..(p + 1) * npp];
            let mut plain = 0.0;
            for k in 0..npp {
                let i = p * npp + k;
                for l in 0..npp {
                    let jj = p * npp + l;
                    plain += fw[i] * aa[i * n + jj] * gv[jj];
                }
            }
            // accurate: ∫_a^b dr [ ∫_a^r + ∫_r^b ] ds on the interpolants
            let mut acc = 0.0;
            for (xr, wr) in gx.iter().zip(gw) {
                let r = 0.5 * (b - a) * xr + 0.5 * (a + b);
                let wr_full = 0.5 * (b - a) * wr;
                let fr = panel_interp(xs, fy, r) * r.powf(nm1);
                let mut inner = 0.0;
                for (xsn, wsn) in gx.iter().zip(gw) {
                    let s = 0.5 * (r - a) * xsn + 0.5 * (a + r);
                    let gs = panel_interp(xs, gy, s) * s.powf(nm1);
                    inner += 0.5 * (r - a) * wsn * gs * angular_average_unchecked(kernel, ctx, r, s);
                }
                for (xsn, wsn) in gx.iter().zip(gw) {
                    let s = 0.5 * (b - r) * xsn + 0.5 * (r + b);
                    let gs = panel_interp(xs, gy, s) * s.powf(nm1);
                    inner += 0.5 * (b - r) * wsn * gs * angular_average_unchecked(kernel, ctx, r, s);
                }
                acc += wr_full * fr * inner;
            }
            acc - plain
        })
        .sum();

    Ok(ctx.surface() * (total + correction))
}

/// Precomputed kernel application matrix on a grid: `(K∗g)(r_i) = Σ_j w_j
/// s_j^{N-1} A_K(r_i, s_j) g_j`. Reused across fixed-point iterations.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    grid: Arc<RadialGrid>,
    aa: Vec<f64>,
}

impl KernelMatrix {
    pub fn build(grid: &Arc<RadialGrid>, kernel: &Kernel) -> Self {
        let aa = angular_matrix(grid, kernel);
        KernelMatrix {
            grid: Arc::clone(grid),
            aa,
        }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    /// (K∗g) at all grid nodes.
    pub fn apply(&self, g: &[f64]) -> Vec<f64> {
        let n = self.grid.len();
        let nm1 = self.grid.ctx().nf() - 1.0;
        let gv: Vec<f64> = (0..n)
            .map(|j| g[j] * self.grid.nodes[j].powf(nm1) * self.grid.weights[j])
            .collect();
        (0..n)
            .map(|i| {
                let mut acc = 0.0;
                for j in 0..n {
                    acc += self.aa[i * n + j] * gv[j];
                }
                acc
            })
            .collect()
    }

    /// Nodal bilinear form N ω_N Σ_i w_i r_i^{N-1} f_i (K∗g)_i.
    pub fn bilinear(&self, f: &[f64], g: &[f64]) -> f64 {
        let applied = self.apply(g);
        let nm1 = self.grid.ctx().nf() - 1.0;
        let s: f64 = (0..self.grid.len())
            .map(|i| f[i] * applied[i] * self.grid.nodes[i].powf(nm1) * self.grid.weights[i])
            .sum();
        self.grid.ctx().surface() * s
    }
}

/// Evaluate (K∗g)(ρ) at radii away from the grid (far-field diagnostics).
pub fn convolve_at(
    grid: &RadialGrid,
    kernel: &Kernel,
    g: &[f64],
    radii: &[f64],
) -> Result<Vec<f64>> {
    if g.len() != grid.len() {
        return Err(Error::Shape("value count does not match grid".into()));
    }
    let ctx = grid.ctx();
    let nm1 = ctx.nf() - 1.0;
    Ok(radii
        .par_iter()
        .map(|&rho| {
            let mut acc = 0.0;
            for j in 0..grid.len() {
                acc += grid.weights[j]
                    * grid.nodes[j].powf(nm1)
                    * g[j]
                    * angular_average_unchecked(kernel, ctx, rho, grid.nodes[j]);
            }
            acc
        })
        .collect())
}

/// High-accuracy bilinear table for closure-defined profiles: per outer node
/// the inner panel containing it is split at the diagonal, so every piece of
/// the double integral sees a smooth integrand.
#[derive(Debug)]
pub struct BilinearTable {
    grid: Arc<RadialGrid>,
    rows: Vec<SplitRow>,
}

#[derive(Debug)]
struct SplitRow {
    s_nodes: Vec<f64>,
    /// weight · s^{N-1} · angular average, ready for Σ g(s)·entry
    s_factor: Vec<f64>,
}

impl BilinearTable {
    pub fn build(grid: &Arc<RadialGrid>, kernel: &Kernel) -> Self {
        let ctx = grid.ctx();
        let nm1 = ctx.nf() - 1.0;
        let npp = grid.nodes_per_panel();
        let (gx, gw) = gauss_rule(npp);
        let rows: Vec<SplitRow> = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let r = grid.nodes[i];
                let home = grid.panel_of(i);
                let mut s_nodes = Vec::new();
                let mut s_factor = Vec::new();
                for p in 0..grid.n_panels() {
                    let (a, b) = (grid.breaks[p], grid.breaks[p + 1]);
                    let segments: [(f64, f64); 2] = if p == home {
                        [(a, r), (r, b)]
                    } else {
                        [(a, b), (b, b)]
                    };
                    for (sa, sb) in segments {
                        if sb - sa <= 0.0 {
                            continue;
                        }
                        for (x, w) in gx.iter().zip(gw) {
                            let s = 0.5 * (sb - sa) * x + 0.5 * (sa + sb);
                            let wq = 0.5 * (sb - sa) * w;
                            s_nodes.push(s);
                            s_factor
                                .push(wq * s.powf(nm1) * angular_average_unchecked(kernel, ctx, r, s));
                        }
                    }
                }
                SplitRow { s_nodes, s_factor }
            })
            .collect();
        BilinearTable {
            grid: Arc::clone(grid),
            rows,
        }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    /// N ω_N ∫ f(r) r^{N-1} (K∗g)(r) dr with closure profiles.
    pub fn bilinear(&self, f: impl Fn(f64) -> f64, g: impl Fn(f64) -> f64) -> f64 {
        let ctx = self.grid.ctx();
        let nm1 = ctx.nf() - 1.0;
        let mut total = 0.0;
        for (i, row) in self.rows.iter().enumerate() {
            let r = self.grid.nodes[i];
            let fr = f(r);
            if fr == 0.0 {
                continue;
            }
            let mut inner = 0.0;
            for (s, fac) in row.s_nodes.iter().zip(&row.s_factor) {
                inner += fac * g(*s);
            }
            total += self.grid.weights[i] * r.powf(nm1) * fr * inner;
        }
        ctx.surface() * total
    }
}

/// Λ-kernel bilinear form of closure profiles through the radial reduction
/// of the Newton potential: `B(f,g) = (N ω_N)² ∫ f(r) r^{N-1} [Λ(r) M_g(r)
/// + T_g(r)] dr` with `M_g(r) = ∫_0^r s^{N-1} g ds` and `T_g(r) = ∫_r^∞
/// s^{N-1} Λ(s) g ds`. Prefix/suffix integrals are panel-exact, so this is
/// an independent high-accuracy route next to the angular-average one.
pub fn newton_bilinear(
    ctx: DimensionContext,
    f: impl Fn(f64) -> f64,
    g: impl Fn(f64) -> f64,
    breaks: &[f64],
    nodes_per_panel: usize,
) -> Result<f64> {
    if breaks.len() < 2 {
        return Err(Error::config("need at least one panel"));
    }
    let (gx, gw) = gauss_rule(nodes_per_panel);
    let nm1 = ctx.nf() - 1.0;
    let n_panels = breaks.len() - 1;
    let sub = |a: f64, b: f64, h: &dyn Fn(f64) -> f64| -> f64 {
        let mut acc = 0.0;
        for (x, w) in gx.iter().zip(gw) {
            let s = 0.5 * (b - a) * x + 0.5 * (a + b);
            acc += 0.5 * (b - a) * w * h(s);
        }
        acc
    };
    let mass_integrand = |s: f64| s.powf(nm1) * g(s);
    let outer_integrand =
        |s: f64| s.powf(nm1) * g(s) * fundsol::lambda(ctx, s).expect("s > 0");

    let mut panel_mass = vec![0.0; n_panels];
    let mut panel_outer = vec![0.0; n_panels];
    for p in 0..n_panels {
        panel_mass[p] = sub(breaks[p], breaks[p + 1], &mass_integrand);
        panel_outer[p] = sub(breaks[p], breaks[p + 1], &outer_integrand);
    }
    let mut prefix = vec![0.0; n_panels + 1];
    let mut suffix = vec![0.0; n_panels + 1];
    for p in 0..n_panels {
        prefix[p + 1] = prefix[p] + panel_mass[p];
    }
    for p in (0..n_panels).rev() {
        suffix[p] = suffix[p + 1] + panel_outer[p];
    }

    let mut total = 0.0;
    for p in 0..n_panels {
        let (a, b) = (breaks[p], breaks[p + 1]);
        for (x, w) in gx.iter().zip(gw) {
            let r = 0.5 * (b - a) * x + 0.5 * (a + b);
            let wq = 0.5 * (b - a) * w;
            let m_in = prefix[p] + sub(a, r, &mass_integrand);
            let t_out = suffix[p + 1] + sub(r, b, &outer_integrand);
            total += wq
                * f(r)
                * r.powf(nm1)
                * (fundsol::lambda(ctx, r)? * m_in + t_out);
        }
    }
    Ok(ctx.surface() * ctx.surface() * total)
}

/// CSV dump of a sampled radial function (r, value).
pub fn profile_csv(f: &RadialFunction) -> String {
    let rows: Vec<Vec<f64>> = f
        .grid
        .nodes()
        .iter()
        .zip(f.values())
        .map(|(r, v)| vec![*r, *v])
        .collect();
    crate::report::csv_document(&["r", "value"], &rows)
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
    fn gauss_rule_exactness() {
        let (x, w) = gauss_rule(8);
        // degree-15 rule integrates x^14 over [-1,1] exactly: 2/15
        let got: f64 = x.iter().zip(w).map(|(x, w)| w * x.powi(14)).sum();
        assert!(rel_err(got, 2.0 / 15.0) < 1e-14);
    }

    #[test]
    fn single_panel_cubic_exact() {
        let grid = Arc::new(RadialGrid::from_breaks(ctx(3), vec![0.0, 1.0], 8).unwrap());
        let f = RadialFunction::sample(&grid, |r| r.powi(3));
        assert!((grid.integrate(f.values()) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn unit_ball_volume() {
        let grid = Arc::new(RadialGrid::from_breaks(ctx(3), vec![0.0, 1.0], 8).unwrap());
        let one = RadialFunction::sample(&grid, |_| 1.0);
        assert!(rel_err(grid.volume_integral(one.values()), 4.0 * PI / 3.0) < 1e-14);
    }

    #[test]
    fn log_grid_resolves_inverse_sqrt() {
        let spec = PanelSpec {
            r_min: 1e-18,
            r_max: 1.0,
            nodes_per_panel: 12,
            panels_per_decade: 5.0,
            oscillation_cap: None,
        };
        let grid = Arc::new(RadialGrid::new(ctx(3), &spec).unwrap());
        let f = RadialFunction::sample(&grid, |r| r.powf(-0.5));
        assert!((grid.integrate(f.values()) - 2.0).abs() < 1e-8);
    }

    #[test]
    fn empty_spec_rejected() {
        assert!(RadialGrid::from_breaks(ctx(3), vec![1.0], 8).is_err());
        assert!(PanelSpec::geometric(0.0, 1.0).breakpoints().is_err());
    }

    #[test]
    fn lp_norm_volume_and_domain() {
        let grid = Arc::new(RadialGrid::from_breaks(ctx(3), vec![0.0, 1.0], 10).unwrap());
        let one = RadialFunction::sample(&grid, |_| 1.0);
        assert!(rel_err(lp_norm(&one, 2.0).unwrap(), (4.0 * PI / 3.0f64).sqrt()) < 1e-13);
        assert!(lp_norm(&one, 0.5).is_err());
    }

    #[test]
    fn lp_norm_instanton_n4() {
        // ||u_1||_4^4 = 32 pi^2/3; oracle: ∫ r^3 (1+r^2)^{-4} dr = 1/12
        // (Beta integral), surface 2 pi^2, prefactor 8^2
        let spec = PanelSpec::geometric(1e-8, 120.0);
        let grid = Arc::new(RadialGrid::new(ctx(4), &spec).unwrap());
        let u1 = RadialFunction::sample(&grid, |r| 8.0f64.sqrt() / (1.0 + r * r));
        let got = lp_norm(&u1, 4.0).unwrap().powi(4);
        assert!(rel_err(got, 32.0 * PI * PI / 3.0) < 1e-7, "{got}");
    }

    #[test]
    fn newton_potential_ball_oracle() {
        // -Δφ = 1_{B1} in R^3: φ = (3-r²)/6 inside, 1/(3r) outside
        let mut breaks = vec![1e-6];
        let mut r = 1e-6;
        while r < 1.0 {
            r = (r * 10.0f64.powf(0.25)).min(1.0);
            breaks.push(r);
        }
        for k in 1..=12 {
            breaks.push(1.0 + 3.0 * k as f64 / 12.0);
        }
        let grid = Arc::new(RadialGrid::from_breaks(ctx(3), breaks, 12).unwrap());
        let ind = RadialFunction::sample(&grid, |r| if r <= 1.0 { 1.0 } else { 0.0 });
        let np = newton_potential(&ind).unwrap();
        assert!(rel_err(np.field.values()[0], 0.5) < 1e-9);
        let (i2, _) = grid
            .nodes()
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - 2.0).abs().partial_cmp(&(b.1 - 2.0).abs()).unwrap())
            .unwrap();
        let r2 = grid.nodes()[i2];
        assert!(rel_err(np.field.values()[i2], 1.0 / (3.0 * r2)) < 1e-9);
        assert!(!np.tail_warning);
    }

    #[test]
    fn newton_potential_linearity() {
        let spec = PanelSpec::geometric(1e-6, 10.0);
        let grid = Arc::new(RadialGrid::new(ctx(3), &spec).unwrap());
        let f = RadialFunction::sample(&grid, |r| (-r * r).exp());
        let g = RadialFunction::sample(&grid, |r| (-(r - 1.0).powi(2)).exp());
        let combo = RadialFunction::sample(&grid, |r| {
            2.5 * (-r * r).exp() - 0.5 * (-(r - 1.0).powi(2)).exp()
        });
        let nf = newton_potential(&f).unwrap().field;
        let ng = newton_potential(&g).unwrap().field;
        let nc = newton_potential(&combo).unwrap().field;
        for i in 0..grid.len() {
            let lin = 2.5 * nf.values()[i] - 0.5 * ng.values()[i];
            assert!((nc.values()[i] - lin).abs() < 1e-12 * lin.abs().max(1.0));
        }
    }

    #[test]
    fn newton_potential_tail_warning() {
        let spec = PanelSpec::geometric(1e-4, 50.0);
        let grid = Arc::new(RadialGrid::new(ctx(3), &spec).unwrap());
        let slow = RadialFunction::sample(&grid, |r| 1.0 / (1.0 + r));
        assert!(newton_potential(&slow).unwrap().tail_warning);
    }

    #[test]
    fn angular_average_total_measure() {
        let got = angular_average(&Kernel::Unit, ctx(3), 1.0, 1.0).unwrap();
        assert!(rel_err(got, 4.0 * PI) < 1e-12);
    }

    #[test]
    fn angular_average_shell_theorem() {
        // Newton's shell theorem: the surface integral of Λ(|x-y|) over
        // |y| = s < r is N ω_N Λ(r); oracle: composite Simpson in θ
        let c = ctx(3);
        let k = Kernel::Newton(c);
        let got = angular_average(&k, c, 2.0, 1.0).unwrap();
        assert!(rel_err(got, 0.5) < 1e-11);
        let (r, s) = (1.3, 0.6);
        let m = 20000;
        let mut acc = 0.0;
        for i in 0..=m {
            let th = PI * i as f64 / m as f64;
            let w = (r * r + s * s - 2.0 * r * s * th.cos()).sqrt();
            let val = fundsol::lambda(c, w).unwrap() * th.sin();
            let coef = if i == 0 || i == m {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += coef * val;
        }
        acc *= PI / m as f64 / 3.0 * 2.0 * PI;
        let got2 = angular_average(&k, c, r, s).unwrap();
        assert!(rel_err(got2, acc) < 1e-9);
        assert!(rel_err(got2, 4.0 * PI * fundsol::lambda(c, r).unwrap()) < 1e-11);
    }

    #[test]
    fn angular_average_symmetry_and_domain() {
        let c = ctx(5);
        let k = Kernel::Helmholtz(c);
        for (r, s) in [(0.3, 0.31), (1.0, 4.0), (7.5, 7.5)] {
            let a = angular_average(&k, c, r, s).unwrap();
            let b = angular_average(&k, c, s, r).unwrap();
            assert!((a - b).abs() < 1e-10 * a.abs().max(1e-10));
        }
        assert!(angular_average(&k, c, 0.0, 1.0).is_err());
    }

    #[test]
    fn quadform_ball_oracle() {
        // f = g = 1_{B1}, K = Λ, N = 3: equals ∫_{B1} φ = 8π/15
        let mut breaks = vec![1e-4, 0.01, 0.1, 0.3, 0.6, 1.0];
        for k in 1..=4 {
            breaks.push(1.0 + k as f64 * 0.5);
        }
        let grid = Arc::new(RadialGrid::from_breaks(ctx(3), breaks, 12).unwrap());
        let ind = RadialFunction::sample(&grid, |r| if r <= 1.0 { 1.0 } else { 0.0 });
        let got = quadform(&ind, &ind, &Kernel::Newton(ctx(3))).unwrap();
        assert!(rel_err(got, 8.0 * PI / 15.0) < 1e-8, "{got}");
    }

    #[test]
    fn quadform_two_paths_agree() {
        // independent paths: angular-average double integral vs
        // N ω_N ∫ f · (Λ∗f) r^{N-1} dr through newton_potential
        for n in [3u32, 4, 5] {
            let c = ctx(n);
            let spec = PanelSpec::geometric(1e-5, 30.0);
            let grid = Arc::new(RadialGrid::new(c, &spec).unwrap());
            let f = RadialFunction::sample(&grid, |r| (-0.7 * r * r).exp() * (1.0 + 0.3 * r));
            let direct = quadform(&f, &f, &Kernel::Newton(c)).unwrap();
            let np = newton_potential(&f).unwrap().field;
            let prod: Vec<f64> = f
                .values()
                .iter()
                .zip(np.values())
                .map(|(a, b)| a * b)
                .collect();
            let via_np = grid.volume_integral(&prod);
            assert!(rel_err(direct, via_np) < 1e-6, "N={n}: {direct} vs {via_np}");
        }
    }

    #[test]
    fn quadform_bilinear_symmetric() {
        let c = ctx(4);
        let spec = PanelSpec::geometric(1e-4, 8.0);
        let grid = Arc::new(RadialGrid::new(c, &spec).unwrap());
        let f = RadialFunction::sample(&grid, |r| (-r * r).exp());
        let g = RadialFunction::sample(&grid, |r| r * (-1.3 * r).exp());
        let k = Kernel::Newton(c);
        let fg = quadform(&f, &g, &k).unwrap();
        let gf = quadform(&g, &f, &k).unwrap();
        assert!(rel_err(fg, gf) < 1e-11);
        let combo = RadialFunction::sample(&grid, |r| {
            2.0 * (-r * r).exp() + 0.7 * r * (-1.3 * r).exp()
        });
        let direct = quadform(&combo, &g, &k).unwrap();
        let gg = quadform(&g, &g, &k).unwrap();
        assert!(rel_err(direct, 2.0 * fg + 0.7 * gg) < 1e-10);
    }

    #[test]
    fn quadform_grid_mismatch() {
        let c = ctx(3);
        let g1 = Arc::new(RadialGrid::new(c, &PanelSpec::geometric(1e-3, 5.0)).unwrap());
        let g2 = Arc::new(RadialGrid::new(c, &PanelSpec::geometric(1e-3, 6.0)).unwrap());
        let f1 = RadialFunction::sample(&g1, |_| 1.0);
        let f2 = RadialFunction::sample(&g2, |_| 1.0);
        assert!(quadform(&f1, &f2, &Kernel::Newton(c)).is_err());
    }

    #[test]
    fn kernel_domination_n3() {
        // |Ψ| ≤ Λ in N = 3 forces the Ψ-form below the Λ-form
        let c = ctx(3);
        let spec = PanelSpec::for_kernels(1e-4, 12.0);
        let grid = Arc::new(RadialGrid::new(c, &spec).unwrap());
        for (a, b) in [(1.0, 0.5), (0.3, 2.0), (2.0, 0.1)] {
            let f = RadialFunction::sample(&grid, |r| (a * (-b * r * r).exp()).abs());
            let psi_form = quadform(&f, &f, &Kernel::Helmholtz(c)).unwrap();
            let lam_form = quadform(&f, &f, &Kernel::Newton(c)).unwrap();
            assert!(psi_form <= lam_form, "{psi_form} vs {lam_form}");
        }
    }

    #[test]
    fn newton_bilinear_ball_oracle() {
        let c = ctx(3);
        let ind = |r: f64| if r <= 1.0 { 1.0 } else { 0.0 };
        let breaks = [1e-6, 0.01, 0.1, 0.4, 1.0, 1.7, 2.5, 4.0];
        let got = newton_bilinear(c, ind, ind, &breaks, 14).unwrap();
        assert!(rel_err(got, 8.0 * PI / 15.0) < 1e-12, "{got}");
    }

    #[test]
    fn bilinear_table_matches_quadform() {
        let c = ctx(4);
        let spec = PanelSpec::geometric(1e-4, 10.0);
        let grid = Arc::new(RadialGrid::new(c, &spec).unwrap());
        let prof = |r: f64| (-0.9 * r * r).exp();
        let f = RadialFunction::sample(&grid, prof);
        let k = Kernel::Newton(c);
        let via_quadform = quadform(&f, &f, &k).unwrap();
        let table = BilinearTable::build(&grid, &k);
        let via_table = table.bilinear(prof, prof);
        assert!(
            rel_err(via_quadform, via_table) < 1e-8,
            "{via_quadform} vs {via_table}"
        );
    }
}
