//! Special functions: Γ, Bessel functions of the second kind `Y_ν` for
//! integer and half-integer orders, their first positive zeros, and the
//! normalized profiles `η_ν(t) = -c_ν t^ν Y_ν(t)` with `c_ν = π/(2^ν Γ(ν))`.
//!
//! Evaluation strategy:
//! - half-integer orders use the exact trigonometric forms, propagated with
//!   the stable upward recurrence on `W_ν = t^ν Y_ν`;
//! - integer orders use the ascending series below `t = 12` and the Hankel
//!   asymptotic expansion above, with `Y_2..Y_4` obtained by upward
//!   recurrence (stable in the `Y` direction);
//! - `η_ν` near `t = 0` goes through series/closed forms with the constant
//!   term cancelled analytically, so `η_ν - 1 = O(t²)` is produced without
//!   the `0·∞` cancellation.

use crate::error::{Error, Result};
use std::f64::consts::PI;

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Largest supported order, stored as twice the order (ν = 9/2).
pub const MAX_TWICE_ORDER: u32 = 9;

/// Switch point between the ascending series and the Hankel expansion for
/// integer orders. Both branches deliver ≥ 1e-9 there at double precision.
const SERIES_ASYMPTOTIC_SWITCH: f64 = 12.0;

/// Bessel order restricted to multiples of 1/2, stored exactly as twice the
/// order. Covers ν = (N-2)/2 + m for N ∈ [3,8], m small.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Order {
    twice: u32,
}

impl Order {
    pub fn from_twice(twice: u32) -> Result<Self> {
        if twice > MAX_TWICE_ORDER {
            return Err(Error::UnsupportedOrder(format!(
                "nu = {}/2 exceeds the supported maximum {}/2",
                twice, MAX_TWICE_ORDER
            )));
        }
        Ok(Order { twice })
    }

    /// Integer order ν = n.
    pub fn integer(n: u32) -> Result<Self> {
        Self::from_twice(2 * n)
    }

    /// Half-integer order ν = n + 1/2.
    pub fn half_integer(n: u32) -> Result<Self> {
        Self::from_twice(2 * n + 1)
    }

    pub fn nu(self) -> f64 {
        self.twice as f64 / 2.0
    }

    pub fn twice(self) -> u32 {
        self.twice
    }

    pub fn is_integer(self) -> bool {
        self.twice % 2 == 0
    }

    /// The order ν - 1, if representable (ν ≥ 1).
    pub fn lower(self) -> Result<Self> {
        if self.twice < 2 {
            return Err(Error::UnsupportedOrder(format!(
                "order {} has no predecessor in the supported range",
                self.nu()
            )));
        }
        Self::from_twice(self.twice - 2)
    }
}

impl std::fmt::Display for Order {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.twice / 2)
        } else {
            write!(f, "{}/2", self.twice)
        }
    }
}

/// Value of `η_ν` at a point, together with the normalization constant.
#[derive(Debug, Clone, Copy)]
pub struct EtaValue {
    pub nu: Order,
    pub t: f64,
    pub value: f64,
    pub cnu: f64,
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Γ(x) for x > 0, Lanczos approximation (g = 7, 9 terms), ≥ 12 significant
/// digits over the supported range.
pub fn gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::domain(format!("gamma requires x > 0, got {x}")));
    }
    Ok(gamma_unchecked(x))
}

fn gamma_unchecked(x: f64) -> f64 {
    if x < 0.5 {
        // reflection keeps full accuracy near 0
        return PI / ((PI * x).sin() * gamma_unchecked(1.0 - x));
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let w = x + LANCZOS_G + 0.5;
    (2.0 * PI).sqrt() * w.powf(x + 0.5) * (-w).exp() * acc
}

/// c_ν = π / (2^ν Γ(ν)) for ν > 0.
pub fn c_nu(nu: Order) -> Result<f64> {
    let v = nu.nu();
    if v <= 0.0 {
        return Err(Error::domain("c_nu requires nu > 0"));
    }
    Ok(PI / (2f64.powf(v) * gamma_unchecked(v)))
}

fn digamma_int(m: u32) -> f64 {
    // ψ(m) = -γ + Σ_{j=1}^{m-1} 1/j
    let mut s = -EULER_GAMMA;
    for j in 1..m {
        s += 1.0 / j as f64;
    }
    s
}

/// J_n(t) by the ascending series; adequate for t ≤ 12, n ≤ 8.
fn bessel_j_int_series(n: u32, t: f64) -> f64 {
    let z = 0.25 * t * t;
    let mut fact_n = 1.0;
    for j in 1..=n {
        fact_n *= j as f64;
    }
    let mut term = (0.5 * t).powi(n as i32) / fact_n;
    let mut sum = term;
    for k in 1..200 {
        term *= -z / (k as f64 * (k + n) as f64);
        sum += term;
        if term.abs() < 1e-17 * sum.abs() + 1e-300 {
            break;
        }
    }
    sum
}

fn bessel_y0_series(t: f64) -> f64 {
    let z = 0.25 * t * t;
    let j0 = bessel_j_int_series(0, t);
    let mut sum = 0.0;
    let mut term = 1.0; // z^k / (k!)^2
    let mut h = 0.0; // harmonic number H_k
    for k in 1..200 {
        term *= z / (k as f64 * k as f64);
        h += 1.0 / k as f64;
        let contrib = if k % 2 == 1 { h * term } else { -h * term };
        sum += contrib;
        if term.abs() * (h + 1.0) < 1e-17 * (sum.abs() + 1.0e-30) {
            break;
        }
    }
    (2.0 / PI) * (((0.5 * t).ln() + EULER_GAMMA) * j0 + sum)
}

fn bessel_yn_series(n: u32, t: f64) -> f64 {
    if n == 0 {
        return bessel_y0_series(t);
    }
    let half = 0.5 * t;
    // singular finite sum
    let mut fact = 1.0; // (n-1-k)! running value, start at (n-1)!
    for j in 1..n {
        fact *= j as f64;
    }
    let mut s1 = 0.0;
    let mut kfact = 1.0;
    let mut pow = half.powi(-(n as i32));
    let mut nk_fact = fact;
    for k in 0..n {
        s1 += nk_fact / kfact * pow;
        pow *= half * half;
        kfact *= (k + 1) as f64;
        if n >= k + 2 {
            nk_fact /= (n - 1 - k) as f64;
        }
    }
    // regular series with digamma weights, carried incrementally
    let mut s2 = 0.0;
    let mut fact_k = 1.0;
    let mut fact_nk = fact * n as f64; // (n+k)! starting at n!
    let mut pw = half.powi(n as i32);
    let mut psi_k = digamma_int(1);
    let mut psi_nk = digamma_int(n + 1);
    for k in 0..200u32 {
        let term = (psi_k + psi_nk) / (fact_k * fact_nk) * pw;
        s2 += if k % 2 == 0 { term } else { -term };
        pw *= half * half;
        fact_k *= (k + 1) as f64;
        fact_nk *= (n + k + 1) as f64;
        psi_k += 1.0 / (k + 1) as f64;
        psi_nk += 1.0 / (n + k + 1) as f64;
        if pw / (fact_k * fact_nk) * 40.0 < 1e-17 * (s2.abs() + 1e-30) {
            break;
        }
    }
    let jn = bessel_j_int_series(n, t);
    (2.0 / PI) * half.ln() * jn - s1 / PI - s2 / PI
}

/// Hankel large-argument expansion, truncated at the smallest term.
fn bessel_y_asymptotic(nu: f64, t: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let omega = t - nu * PI / 2.0 - PI / 4.0;
    let mut p = 0.0;
    let mut q = 0.0;
    let mut c = 1.0; // a_k term
    let mut k = 0u32;
    let mut last = f64::INFINITY;
    while k < 40 {
        let contrib = if (k / 2) % 2 == 0 { c } else { -c };
        if k % 2 == 0 {
            p += contrib;
        } else {
            q += contrib;
        }
        let odd = (2 * k + 1) as f64;
        let next = c * (mu - odd * odd) / ((k + 1) as f64 * 8.0 * t);
        if next.abs() >= last {
            break; // divergence onset of the asymptotic series
        }
        last = next.abs();
        c = next;
        if c.abs() < 1e-18 {
            break;
        }
        k += 1;
    }
    (2.0 / (PI * t)).sqrt() * (omega.sin() * p + omega.cos() * q)
}

/// W_ν = t^ν Y_ν for half-integer ν, by the upward recurrence
/// W_{ν+1} = 2ν W_ν - t² W_{ν-1} started from the exact ν = 1/2, 3/2 forms.
fn w_half_integer(twice: u32, t: f64) -> f64 {
    debug_assert!(twice % 2 == 1);
    let c = (2.0 / PI).sqrt();
    let w12 = -c * t.cos();
    if twice == 1 {
        return w12;
    }
    let mut wm = w12;
    let mut w = -c * (t.cos() + t * t.sin());
    let mut nu = 1.5;
    let mut cur = 3;
    while cur < twice {
        let next = 2.0 * nu * w - t * t * wm;
        wm = w;
        w = next;
        nu += 1.0;
        cur += 2;
    }
    w
}

/// Bessel function of the second kind `Y_ν(t)` for t > 0 and supported
/// orders (multiples of 1/2 up to 9/2).
pub fn bessel_y(nu: Order, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::domain(format!("bessel_y requires t > 0, got {t}")));
    }
    if !nu.is_integer() {
        let w = w_half_integer(nu.twice(), t);
        return Ok(w * t.powf(-nu.nu()));
    }
    let n = nu.twice() / 2;
    if t < SERIES_ASYMPTOTIC_SWITCH {
        Ok(bessel_yn_series(n, t))
    } else {
        let y0 = bessel_y_asymptotic(0.0, t);
        if n == 0 {
            return Ok(y0);
        }
        let y1 = bessel_y_asymptotic(1.0, t);
        if n == 1 {
            return Ok(y1);
        }
        let mut ym = y0;
        let mut y = y1;
        for m in 1..n {
            let next = (2.0 * m as f64 / t) * y - ym;
            ym = y;
            y = next;
        }
        Ok(y)
    }
}

/// First positive zero `y_ν` of `Y_ν`, by bracketing and bisection to
/// absolute tolerance 1e-10; memoized per order. `Y_ν < 0` on `(0, y_ν)`.
pub fn first_zero(nu: Order) -> f64 {
    static ZEROS: [std::sync::OnceLock<f64>; (MAX_TWICE_ORDER + 1) as usize] =
        [const { std::sync::OnceLock::new() }; (MAX_TWICE_ORDER + 1) as usize];
    *ZEROS[nu.twice() as usize].get_or_init(|| first_zero_uncached(nu))
}

fn first_zero_uncached(nu: Order) -> f64 {
    let f = |t: f64| bessel_y(nu, t).expect("positive argument");
    let mut a = 0.05;
    let mut fa = f(a);
    let mut b = a;
    loop {
        b += 0.05;
        let fb = f(b);
        if fa < 0.0 && fb >= 0.0 {
            break;
        }
        a = b;
        fa = fb;
        assert!(b < 50.0, "first zero of Y_{nu} not found below 50");
    }
    let mut lo = a;
    let mut hi = b;
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Window below which `η_ν` is evaluated through the cancelled series.
const ETA_SERIES_WINDOW: f64 = 0.5;

/// `η_ν(t) - 1` without cancellation, for ν ≥ 1 in the supported range and
/// small `t` (used below [`ETA_SERIES_WINDOW`]; valid for t up to O(1)).
pub fn eta_minus_one(nu: Order, t: f64) -> Result<f64> {
    if nu.nu() < 1.0 {
        return Err(Error::domain(format!("eta requires nu >= 1, got {nu}")));
    }
    if t < 0.0 {
        return Err(Error::domain("eta requires t >= 0"));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    match nu.twice() {
        3 => {
            // η_{3/2} - 1 = t sin t - 2 sin²(t/2)
            Ok(t * t.sin() - 2.0 * (0.5 * t).sin().powi(2))
        }
        5 => {
            // η_{5/2} - 1 = t sin t - 2 sin²(t/2) - (t²/3) cos t
            Ok(t * t.sin() - 2.0 * (0.5 * t).sin().powi(2) - t * t / 3.0 * t.cos())
        }
        7 | 9 => {
            // no small-argument demand for these orders; go through W_ν
            let c = c_nu(nu)?;
            Ok(-c * w_half_integer(nu.twice(), t) - 1.0)
        }
        twice => {
            let n = twice / 2;
            Ok(eta_minus_one_int(n, t))
        }
    }
}

/// Integer-order `η_n - 1` with the constant term cancelled analytically:
/// the finite hypergeometric part, the `ln(t/2) J_n` part and the digamma
/// series, each O(t²) or smaller.
fn eta_minus_one_int(n: u32, t: f64) -> f64 {
    let half = 0.5 * t;
    let z = half * half;
    let mut fact_nm1 = 1.0; // (n-1)!
    for j in 1..n {
        fact_nm1 *= j as f64;
    }
    // Σ_{k=1}^{n-1} (n-k-1)!/((n-1)! k!) z^k
    let mut s1 = 0.0;
    let mut num = fact_nm1; // (n-1-k)!
    let mut kfact = 1.0;
    let mut zp = 1.0;
    for k in 1..n {
        num /= (n - k) as f64;
        kfact *= k as f64;
        zp *= z;
        s1 += num / (fact_nm1 * kfact) * zp;
    }
    // -(2/(n-1)!) (t/2)^n ln(t/2) J_n(t)
    let jn = bessel_j_int_series(n, t);
    let s2 = -(2.0 / fact_nm1) * half.powi(n as i32) * half.ln() * jn;
    // (1/(n-1)!) Σ_k (-1)^k [ψ(k+1)+ψ(n+k+1)] /(k!(n+k)!) (t/2)^{2k+2n}
    let mut s3 = 0.0;
    let mut fact_k = 1.0;
    let mut fact_nk = fact_nm1 * n as f64; // (n+k)!
    let mut pw = half.powi(2 * n as i32);
    let mut psi_k = digamma_int(1);
    let mut psi_nk = digamma_int(n + 1);
    for k in 0..120u32 {
        let term = (psi_k + psi_nk) / (fact_k * fact_nk) * pw;
        s3 += if k % 2 == 0 { term } else { -term };
        pw *= z;
        fact_k *= (k + 1) as f64;
        fact_nk *= (n + k + 1) as f64;
        psi_k += 1.0 / (k + 1) as f64;
        psi_nk += 1.0 / (n + k + 1) as f64;
        if pw / (fact_k * fact_nk) * 20.0 < 1e-18 * (s3.abs() + 1e-30) {
            break;
        }
    }
    s1 + s2 + s3 / fact_nm1
}

/// `η_ν(t) = -c_ν t^ν Y_ν(t)` for ν ≥ 1, continuous at `t = 0` with
/// `η_ν(0) = 1`. Small arguments go through the cancelled series.
pub fn eta(nu: Order, t: f64) -> Result<f64> {
    if nu.nu() < 1.0 {
        return Err(Error::domain(format!("eta requires nu >= 1, got {nu}")));
    }
    if t < 0.0 {
        return Err(Error::domain("eta requires t >= 0"));
    }
    if t < ETA_SERIES_WINDOW {
        return Ok(1.0 + eta_minus_one(nu, t)?);
    }
    let c = c_nu(nu)?;
    if nu.is_integer() {
        Ok(-c * t.powf(nu.nu()) * bessel_y(nu, t)?)
    } else {
        Ok(-c * w_half_integer(nu.twice(), t))
    }
}

/// `η_ν(t)` packaged with its normalization constant.
pub fn eta_value(nu: Order, t: f64) -> Result<EtaValue> {
    Ok(EtaValue {
        nu,
        t,
        value: eta(nu, t)?,
        cnu: c_nu(nu)?,
    })
}
