//! Singular integrals along rays: `Ω(ϑ)`, `Δ(α)`, the `Λ` tails and `Q`.
//!
//! All of them share an integrable endpoint singularity of order
//! `x^{2-2d}` (or `x^{-2h}` before integration) at the origin and decay
//! exponentially at infinity. The origin is regularised with the power
//! substitution `x = u^{1/(3-2d)}`; the rest is handled by an adaptive 15-point
//! Gauss–Kronrod rule.

use std::collections::BinaryHeap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perturbation::one_plus_two_gamma;
use crate::C64;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Tolerances and geometry for the singular integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// End of the substituted region near the origin.
    pub x_split: f64,
    /// Below this the integrands switch to power series.
    pub series_switch: f64,
    /// Hard cap on the truncated upper limit.
    pub x_max_cap: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            abs_tol: 1e-10,
            rel_tol: 1e-9,
            x_split: 1.0,
            series_switch: 1e-2,
            x_max_cap: 200.0,
            max_subdivisions: 4000,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0 && self.x_split > 0.0) {
            return Err(Error::InvalidInput(
                "quadrature tolerances and split point must be positive".into(),
            ));
        }
        Ok(())
    }

    /// The same spec with both tolerances scaled.
    pub fn tightened(&self, factor: f64) -> Self {
        QuadratureSpec {
            abs_tol: self.abs_tol * factor,
            rel_tol: self.rel_tol * factor,
            ..*self
        }
    }

    fn target(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureResult {
    pub value: f64,
    pub err_estimate: f64,
    pub evaluations: usize,
}

impl QuadratureResult {
    fn add(self, other: QuadratureResult) -> QuadratureResult {
        QuadratureResult {
            value: self.value + other.value,
            err_estimate: self.err_estimate + other.err_estimate,
            evaluations: self.evaluations + other.evaluations,
        }
    }

    fn scale(self, k: f64) -> QuadratureResult {
        QuadratureResult {
            value: self.value * k,
            err_estimate: self.err_estimate * k.abs(),
            evaluations: self.evaluations,
        }
    }

    fn checked(self, spec: &QuadratureSpec) -> Result<QuadratureResult> {
        let tol = spec.target(self.value);
        if !self.value.is_finite() || !(self.err_estimate <= tol) {
            return Err(Error::ToleranceNotMet {
                estimate: self.err_estimate,
                tolerance: tol,
            });
        }
        Ok(self)
    }
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Globally adaptive Gauss–Kronrod (7/15) integration on `[a, b]`.
///
/// The returned error estimate is the sum of `|K15 - G7|` over the final
/// subintervals. No tolerance check is applied here.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64, max_subdivisions: usize) -> QuadratureResult {
    if a == b {
        return QuadratureResult {
            value: 0.0,
            err_estimate: 0.0,
            evaluations: 0,
        };
    }
    let (v, e) = kronrod(&f, a, b);
    let mut evaluations = 15;
    let mut heap = BinaryHeap::new();
    heap.push(Piece { a, b, value: v, err: e });
    let mut total = v;
    let mut err = e;
    let mut pieces = 1;
    while err > abs_tol.max(rel_tol * total.abs()) && pieces < max_subdivisions {
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            heap.push(worst);
            break;
        }
        let (v1, e1) = kronrod(&f, worst.a, mid);
        let (v2, e2) = kronrod(&f, mid, worst.b);
        evaluations += 30;
        total += v1 + v2 - worst.value;
        err += e1 + e2 - worst.err;
        heap.push(Piece { a: worst.a, b: mid, value: v1, err: e1 });
        heap.push(Piece { a: mid, b: worst.b, value: v2, err: e2 });
        pieces += 1;
    }
    // re-sum to shed the drift of the running totals
    let (value, err_estimate) = heap.iter().fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.err));
    QuadratureResult {
        value,
        err_estimate,
        evaluations,
    }
}

/// `∫_0^b f(x) dx` for `f ~ x^{q}` near 0 with `q > -1`, via `x = u^{1/(q+1)}`.
pub fn integrate_power_singular<F: Fn(f64) -> f64>(f: F, exponent: f64, b: f64, abs_tol: f64, rel_tol: f64, max_subdivisions: usize) -> QuadratureResult {
    let p = exponent + 1.0;
    let inv = 1.0 / p;
    let g = |u: f64| {
        if u <= 0.0 {
            return 0.0;
        }
        let x = u.powf(inv);
        f(x) * inv * x / u
    };
    integrate(g, 0.0, b.powf(p), abs_tol, rel_tol, max_subdivisions)
}

fn check_dimension(d0: f64) -> Result<()> {
    if !(d0 > 1.0 && d0 < 1.5) {
        return Err(Error::InvalidDimension(d0));
    }
    Ok(())
}

/// Power series of `x sinh x + ϑx sin ϑx - 2(cosh x - cos ϑx)` and of
/// `cosh x - cos ϑx`, both in `x²`.
fn omega_series(theta: f64, x: f64) -> (f64, f64) {
    let x2 = x * x;
    let t2 = theta * theta;
    let mut num = 0.0;
    let mut den = 0.0;
    // running x^{2n}, ϑ^{2n}, (2n)!, with sign (-1)^n
    let mut xp = 1.0;
    let mut tp = 1.0;
    let mut fact = 1.0;
    let mut sign = 1.0;
    for n in 1..40 {
        let nf = n as f64;
        xp *= x2;
        tp *= t2;
        fact *= (2.0 * nf - 1.0) * (2.0 * nf);
        sign = -sign;
        let c = 1.0 - sign * tp;
        let d_term = c * xp / fact;
        den += d_term;
        if n >= 2 {
            // (1 - 1/n)/(2n-1)! = (1 - 1/n)·2n/(2n)!
            num += (1.0 - 1.0 / nf) * 2.0 * nf * c * xp / fact;
        }
        if n >= 3 && d_term.abs() < 1e-18 * den.abs() && (xp * tp.max(1.0) / fact) < 1e-18 * den.abs() {
            break;
        }
    }
    (num, den)
}

/// The `Ω` integrand without the `√(ϑ²+1)` prefactor.
pub fn omega_integrand(theta: f64, d0: f64, x: f64, series_switch: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x < series_switch {
        let (num, den) = omega_series(theta, x);
        return -num * den.powf(-d0 - 1.0);
    }
    let den = x.cosh() - (theta * x).cos();
    let num = x * x.sinh() + theta * x * (theta * x).sin();
    (2.0 - num / den) * den.powf(-d0)
}

/// First `x ≥ start` (integer steps) where a rigorous envelope of the
/// integrand drops below `floor`, capped.
fn decay_cutoff(start: f64, cap: f64, floor: f64, envelope: impl Fn(f64) -> f64) -> f64 {
    let mut x = start.max(1.0);
    while x < cap && envelope(x) >= floor {
        x += 1.0;
    }
    x.min(cap)
}

/// `Ω(ϑ) = √(ϑ²+1) ∫_0^∞ (2 - (x sinh x + ϑx sin ϑx)/(cosh x - cos ϑx))
/// (cosh x - cos ϑx)^{-d0} dx`.
pub fn omega(theta: f64, d0: f64, spec: &QuadratureSpec) -> Result<QuadratureResult> {
    check_dimension(d0)?;
    spec.validate()?;
    let s = spec.series_switch;
    let f = |x: f64| omega_integrand(theta, d0, x, s);
    let pre = (theta * theta + 1.0).sqrt();
    let x_max = decay_cutoff(spec.x_split, spec.x_max_cap, spec.abs_tol * 1e-3, |x| {
        let c = x.cosh() - 1.0;
        (2.0 + x * (x.sinh() + theta.abs()) / c) * c.powf(-d0) * pre
    });
    split_integral(&f, 2.0 - 2.0 * d0, x_max, spec, pre)
}

/// `∫_0^{x_max} f` split at `x_split`, scaled by `prefactor`, with the
/// tolerance distributed over both pieces.
fn split_integral<F: Fn(f64) -> f64>(f: &F, exponent: f64, x_max: f64, spec: &QuadratureSpec, prefactor: f64) -> Result<QuadratureResult> {
    let split = spec.x_split.min(x_max);
    let abs = spec.abs_tol / (4.0 * prefactor.abs());
    let rel = spec.rel_tol / 4.0;
    let near = integrate_power_singular(f, exponent, split, abs, rel, spec.max_subdivisions);
    let far = integrate(f, split, x_max, abs, rel, spec.max_subdivisions);
    near.add(far).scale(prefactor).checked(spec)
}

/// `Re(z sinh z/(cosh z - 1)) - 2`, i.e. `Re(z coth(z/2)) - 2`.
fn coth_excess(z: C64) -> f64 {
    if z.norm() < 1e-2 {
        let z2 = z * z;
        return (z2 * (1.0 / 6.0 + z2 * (-1.0 / 360.0 + z2 * (1.0 / 15120.0 - z2 / 604800.0)))).re;
    }
    (z * z.sinh() / (z.cosh() - 1.0)).re - 2.0
}

/// `ln |4 sinh²(z/2)|`, overflow-free.
fn log_four_sinh_sq(z: C64) -> f64 {
    if z.re > 2.0 {
        z.re + 2.0 * (1.0 - (-z).exp()).norm().ln()
    } else if z.re < -2.0 {
        log_four_sinh_sq(-z)
    } else {
        2.0 * (2.0 * (z / 2.0).sinh()).norm().ln()
    }
}

/// `Λ_ε^h(z) = |e^z/(e^z - 1)²|^h |e^{εz}|`.
pub fn lambda_fn(h: f64, eps: f64, z: C64) -> f64 {
    (-h * log_four_sinh_sq(z) + eps * z.re).exp()
}

/// `Δ(α)`, evaluated along the ray `s ↦ e^{iα}s` in its complex form
/// `H ∫_0^∞ (Re(vs coth(vs/2)) - 2) |1/(4 sinh²(vs/2))|^{D0} ds`.
pub fn delta_alpha(alpha: f64, d0: f64, h_mu: f64, spec: &QuadratureSpec) -> Result<QuadratureResult> {
    check_dimension(d0)?;
    spec.validate()?;
    if !(alpha.abs() < PI / 2.0) {
        return Err(Error::InvalidInput(format!("alpha {alpha} outside (-pi/2, pi/2)")));
    }
    if !(h_mu > 0.0) {
        return Err(Error::InvalidInput("H_mu must be positive".into()));
    }
    let v = C64::from_polar(1.0, alpha);
    let f = |s: f64| {
        let z = v * s;
        coth_excess(z) * lambda_fn(d0, 0.0, z)
    };
    let c = alpha.cos();
    let s_max = decay_cutoff(spec.x_split, spec.x_max_cap / c, spec.abs_tol * 1e-3 / h_mu, |s| {
        let e = (-c * s).exp();
        (2.0 + s * (1.0 + e) / (1.0 - e)) * (e / ((1.0 - e) * (1.0 - e))).powf(d0)
    });
    split_integral(&f, 2.0 - 2.0 * d0, s_max, spec, h_mu)
}

fn check_tail(h: f64, eps: f64, alpha: f64) -> Result<()> {
    if !(h > 1.0) || !(eps.abs() <= 1.0) || !(alpha.abs() < PI / 2.0) {
        return Err(Error::InvalidInput(format!("tail parameters h={h}, eps={eps}, alpha={alpha}")));
    }
    if !(eps - h < 0.0) {
        return Err(Error::InvalidInput("tail diverges unless eps < h".into()));
    }
    Ok(())
}

/// `∫_t^∞ Λ_ε^h(e^{iα}s) ds`.
pub fn lambda_tail(h: f64, eps: f64, alpha: f64, t_lower: f64, spec: &QuadratureSpec) -> Result<QuadratureResult> {
    check_tail(h, eps, alpha)?;
    spec.validate()?;
    if !(t_lower > 0.0) {
        return Err(Error::InvalidInput("lower limit must be positive".into()));
    }
    let v = C64::from_polar(1.0, alpha);
    let f = |s: f64| lambda_fn(h, eps, v * s);
    let rate = (h - eps) * alpha.cos();
    let abs = spec.abs_tol / 4.0;
    let rel = spec.rel_tol / 4.0;
    let mut out = QuadratureResult {
        value: 0.0,
        err_estimate: 0.0,
        evaluations: 0,
    };
    let mut start = t_lower;
    if t_lower < 1.0 {
        // steep s^{-2h} growth: integrate in log s
        let g = |y: f64| {
            let s = y.exp();
            f(s) * s
        };
        out = out.add(integrate(g, t_lower.ln(), 0.0, abs, rel, spec.max_subdivisions));
        start = 1.0;
    }
    // envelope: Λ ≤ (1 - e^{-c})^{-2h} e^{-rate s} for s ≥ 1, c = cos α
    let c = alpha.cos();
    let k = (1.0 - (-c).exp()).powf(-2.0 * h);
    let floor = (abs * 1e-3).max(f64::MIN_POSITIVE);
    let s_max = start + (((k / rate) / floor).ln() / rate).max(1.0);
    let far = integrate(f, start, s_max, abs, rel, spec.max_subdivisions);
    let tail_bound = k / rate * (-rate * s_max).exp();
    out = out.add(far);
    out.err_estimate += tail_bound;
    out.checked(spec)
}

/// `Q^h_α(t) = H Re(v + 2vΓ(vt)) ∫_t^∞ Λ_0^h(vs) ds`.
pub fn q_fn(h: f64, alpha: f64, t: f64, h_mu: f64, spec: &QuadratureSpec) -> Result<f64> {
    let v = C64::from_polar(1.0, alpha);
    let weight = (v * one_plus_two_gamma(v * t)?).re;
    let tail = lambda_tail(h, 0.0, alpha, t, spec)?;
    Ok(h_mu * weight * tail.value)
}

/// `∫_0^∞ Q^h_α(t) dt` as a nested quadrature.
pub fn q_integral(h: f64, alpha: f64, h_mu: f64, spec: &QuadratureSpec) -> Result<QuadratureResult> {
    check_tail(h, 0.0, alpha)?;
    spec.validate()?;
    let inner = spec.tightened(1e-3);
    let failure = std::cell::Cell::new(None);
    let f = |t: f64| match q_fn(h, alpha, t, 1.0, &inner) {
        Ok(v) => v,
        Err(e) => {
            failure.set(Some(e));
            0.0
        }
    };
    let c = alpha.cos();
    let rate = h * c;
    let k = 2.0 * (1.0 - (-c).exp()).powf(-2.0 * h) / rate;
    let t_max = decay_cutoff(spec.x_split, spec.x_max_cap / c, spec.abs_tol * 1e-3 / h_mu, |t| k * (-rate * t).exp());
    let res = split_integral(&f, 2.0 - 2.0 * h, t_max, spec, h_mu);
    if let Some(e) = failure.take() {
        return Err(e);
    }
    res
}

/// `∫_0^s Re(v (sinh(vt) - vt)/(cosh(vt) - 1)) dt` by quadrature and its
/// closed form `Re(vs sinh(vs)/(cosh(vs) - 1)) - 2`.
pub fn inner_identity(s: f64, alpha: f64, spec: &QuadratureSpec) -> Result<(f64, f64)> {
    let v = C64::from_polar(1.0, alpha);
    let f = |t: f64| (v * one_plus_two_gamma(v * t).unwrap_or(C64::new(f64::NAN, 0.0))).re;
    let q = integrate(f, 0.0, s, spec.abs_tol, spec.rel_tol, spec.max_subdivisions).checked(spec)?;
    Ok((q.value, coth_excess(v * s)))
}

/// Partial sums of `Σ_{n≥2} (1-1/n)(1-(-1)^n ϑ^{2n})/(2n-1)! x^{2n}`.
pub fn step5_partial_sums(theta: f64, x: f64, terms: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(terms);
    let mut sum = 0.0;
    let x2 = x * x;
    let t2 = theta * theta;
    let mut xp = x2;
    let mut tp = t2;
    let mut fact = 1.0; // (2n-1)!
    let mut sign = -1.0;
    for n in 2..2 + terms {
        let nf = n as f64;
        xp *= x2;
        tp *= t2;
        fact *= (2.0 * nf - 2.0) * (2.0 * nf - 1.0);
        sign = -sign;
        sum += (1.0 - 1.0 / nf) * (1.0 - sign * tp) * xp / fact;
        out.push(sum);
    }
    out
}

/// Root of `ϑ ↦ Ω(ϑ, d0)` in `bracket` by bisection to `1e-6`.
pub fn find_theta0(d0: f64, bracket: (f64, f64), spec: &QuadratureSpec) -> Result<f64> {
    check_dimension(d0)?;
    let (mut lo, mut hi) = bracket;
    let mut f_lo = omega(lo, d0, spec)?.value;
    let f_hi = omega(hi, d0, spec)?.value;
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::NoSignChange { low: lo, high: hi });
    }
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        let f_mid = omega(mid, d0, spec)?.value;
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
