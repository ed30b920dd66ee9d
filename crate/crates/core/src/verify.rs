//! Property batteries for every module, runnable as named suites.
//!
//! Each check samples the statement it tests, reports the worst margin it
//! saw, and never panics: numerical errors turn into failed checks. Where a
//! statement only asserts that some constant (`N`, `K`, `R`) exists, the
//! check fits the smallest admissible value and compares it with a modest
//! ceiling.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boettcher::{build_table, BoettcherTable};
use crate::error::{Error, Result};
use crate::fatou::{empirical_cutoff, psi, psi_prime, psi_prime_forms, phi_fatou, w_region_contains};
use crate::perturbation::{gamma_fn, gamma_forms, one_plus_two_gamma, phi_dot_table, psi_dot, sinh_z_minus_z_nonvanishing};
use crate::quadrature::{delta_alpha, find_theta0, omega, q_integral, step5_partial_sums, QuadratureSpec};
use crate::transfer::{
    auto_depth, bowen_root, cylinder_measure, dimension_at_level, equilibrium_of, orbit_expansion_check, pressure,
    pressure_oracle, Partition, TransferOperator,
};
use crate::C64;

const TABLE_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Appendix,
    Fatou,
    Cylinders,
    Transfer,
    Perturbation,
    Quadrature,
}

impl Suite {
    pub const ALL: [Suite; 6] = [
        Suite::Appendix,
        Suite::Fatou,
        Suite::Cylinders,
        Suite::Transfer,
        Suite::Perturbation,
        Suite::Quadrature,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Appendix => "appendix",
            Suite::Fatou => "fatou",
            Suite::Cylinders => "cylinders",
            Suite::Transfer => "transfer",
            Suite::Perturbation => "perturbation",
            Suite::Quadrature => "quadrature",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown suite '{s}'")))
    }
}

/// Outcome of one property check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub suite: Suite,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(suite: Suite, name: &str, outcome: Result<(bool, String)>) -> Self {
        let (passed, detail) = match outcome {
            Ok(x) => x,
            Err(e) => (false, format!("{}: {e}", e.category())),
        };
        Check {
            suite,
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Random draws per sampled identity.
    pub samples: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            seed: 20240601,
            samples: 10_000,
        }
    }
}

pub fn run_suite(suite: Suite, opts: &VerifyOptions) -> Vec<Check> {
    type Job = fn(&VerifyOptions) -> Result<(bool, String)>;
    let jobs: Vec<(&str, Job)> = match suite {
        Suite::Appendix => vec![
            ("h3: |sinh(z/2)|^2 = (cosh x - cos y)/2", check_h3),
            ("h4: coth(z/2) = (sinh x - i sin y)/(cosh x - cos y)", check_h4),
            ("lemma 4.1 (1)", check_exp_1),
            ("lemma 4.1 (2)", check_exp_2),
            ("lemma 4.1 (3)", check_exp_3),
            ("lemma 4.2 aligned sums", check_aligned_sums),
            ("lemma 4.3 W region", check_w_region),
            ("lemma 4.4 exponential ratio", check_exp_ratio),
            ("lemma 4.5 Psi' ratio", check_psi_prime_ratio),
        ],
        Suite::Fatou => vec![
            ("Psi examples and parabolic limit", check_psi_examples),
            ("Phi inverts Psi", check_round_trip),
            ("Psi' closed forms agree", check_psi_prime_forms),
            ("lemma 3.2 near translation (eps=0.1, 100 steps)", check_near_translation),
        ],
        Suite::Cylinders => vec![
            ("lemma 6.6 size vs |Psi'(-n)|", check_size_vs_psi_prime),
            ("cor 6.7 two-regime sizes at 0.1e^{i pi/6}", check_size_regimes),
            ("parabolic sizes n^2|C_n| bounded", check_parabolic_sizes),
            ("cor 8.6 two-regime measures", check_measure_regimes),
        ],
        Suite::Transfer => vec![
            ("pressure on the circle", check_circle_pressure),
            ("pressure vs preimage oracle", check_pressure_oracle),
            ("dimension symmetric under conjugation", check_conjugation_symmetry),
            ("Bowen root stable in level", check_level_stability),
            ("equilibrium stationarity", check_stationarity),
            ("expansion along the fixed-point orbit", check_orbit_expansion),
        ],
        Suite::Perturbation => vec![
            ("Gamma closed forms agree", check_gamma_forms),
            ("eq 9.23: sinh z - z nonvanishing on 0<|z|<=2", check_sinh_nonvanishing),
            ("psi-dot direct and orbit forms agree", check_psi_dot_forms),
            ("prop 9.1 psi-dot vs Gamma", check_psi_dot_gamma),
            ("prop 9.2 1+2psi-dot vs 1+2Gamma", check_psi_dot_gamma2),
            ("phi-dot vs finite differences", check_phi_dot_fd),
        ],
        Suite::Quadrature => vec![
            ("omega negative on [-1,1]", check_omega_sign),
            ("omega even", check_omega_even),
            ("identity chain Delta = -2^-D Omega = int Q", check_identity_chain),
            ("theta0 near 1.3", check_theta0),
            ("series positivity (step 5)", check_step5),
        ],
    };
    jobs.into_par_iter()
        .map(|(name, job)| Check::new(suite, name, job(opts)))
        .collect()
}

pub fn run_all(opts: &VerifyOptions) -> Vec<Check> {
    Suite::ALL.iter().flat_map(|&s| run_suite(s, opts)).collect()
}

fn rng(opts: &VerifyOptions, salt: u64) -> StdRng {
    StdRng::seed_from_u64(opts.seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn verdict(worst: f64, limit: f64, what: &str) -> (bool, String) {
    (worst < limit, format!("worst {what} {worst:.3e} (limit {limit:.1e})"))
}

/// Random point with `|Re| ∈ [0.5, 20]`, `|Im| ≤ 20`.
fn sample_z(r: &mut StdRng) -> C64 {
    let x = r.gen_range(0.5..20.0) * if r.gen_bool(0.5) { 1.0 } else { -1.0 };
    C64::new(x, r.gen_range(-20.0..20.0))
}

// ---------------------------------------------------------------- appendix

fn check_h3(o: &VerifyOptions) -> Result<(bool, String)> {
    let mut r = rng(o, 1);
    let worst = (0..o.samples)
        .map(|_| {
            let z = sample_z(&mut r);
            let lhs = (z / 2.0).sinh().norm_sqr();
            let rhs = (z.re.cosh() - z.im.cos()) / 2.0;
            (lhs - rhs).abs() / rhs
        })
        .fold(0.0, f64::max);
    Ok(verdict(worst, 1e-12, "relative error"))
}

fn check_h4(o: &VerifyOptions) -> Result<(bool, String)> {
    let mut r = rng(o, 2);
    let worst = (0..o.samples)
        .map(|_| {
            let z = sample_z(&mut r);
            let lhs = (z / 2.0).cosh() / (z / 2.0).sinh();
            let rhs = C64::new(z.re.sinh(), -z.im.sin()) / (z.re.cosh() - z.im.cos());
            let alt = z.sinh() / (z.cosh() - 1.0);
            ((lhs - rhs).norm() / rhs.norm()).max((alt - rhs).norm() / rhs.norm())
        })
        .fold(0.0, f64::max);
    Ok(verdict(worst, 1e-12, "relative error"))
}

/// Smallest `upper - lower` over the draws, which must stay positive.
fn margin_verdict(margin: f64) -> (bool, String) {
    (margin > 0.0, format!("smallest margin {margin:.3e}"))
}

fn unit_disk_point(r: &mut StdRng, radius: f64) -> C64 {
    C64::from_polar(radius * r.gen::<f64>().sqrt(), r.gen_range(-PI..PI))
}

fn check_exp_1(o: &VerifyOptions) -> Result<(bool, String)> {
    let mut r = rng(o, 3);
    let margin = (0..o.samples)
        .map(|_| {
            let a = r.gen_range(0.0..5.0f64);
            let e = r.gen_range(1e-6..1.0 - 1e-6);
            ((2.0 * a).exp() - 1.0 + 2.0 * e) - (a.exp() * (1.0 + e) - 1.0)
        })
        .fold(f64::INFINITY, f64::min);
    Ok(margin_verdict(margin))
}

fn check_exp_2(o: &VerifyOptions) -> Result<(bool, String)> {
    let mut r = rng(o, 4);
    let margin = (0..o.samples)
        .map(|_| {
            let a = r.gen_range(0.0..3.0f64);
            let (e, et) = (r.gen_range(1e-6..1.0), r.gen_range(1e-6..1.0));
            let (e1, et1) = (r.gen_range(0.0..1.0f64), r.gen_range(0.0..1.0f64));
            let rx = (e1 * a).exp() - 1.0 + e;
            let ry = (et1 * a).exp() - 1.0 + et;
            let x = 1.0 + unit_disk_point(&mut r, rx);
            let y = 1.0 + unit_disk_point(&mut r, ry);
            let bound = ((2.0 * e1 + 2.0 * et1) * a).exp() - 1.0 + 2.0 * e + 2.0 * et;
            bound - (x * y - 1.0).norm()
        })
        .fold(f64::INFINITY, f64::min);
    Ok(margin_verdict(margin))
}

fn check_exp_3(o: &VerifyOptions) -> Result<(bool, String)> {
    let mut r = rng(o, 5);
    let margin = (0..o.samples)
        .map(|_| {
            let z = unit_disk_point(&mut r, 5.0);
            let e = r.gen_range(1e-6..1.0);
            let x = 1.0 + unit_disk_point(&mut r, e);
            ((2.0 * z.norm()).exp() - 1.0 + 2.0 * e) - (x * z.exp() - 1.0).norm()
        })
        .fold(f64::INFINITY, f64::min);
    Ok(margin_verdict(margin))
}

/// `|Σ (e^{-kδ} - 1)| > ½ Σ |e^{-kδ} - 1|` with `|δ| < 0.05`.
fn check_aligned_sums(o: &VerifyOptions) -> Result<(bool, String)> {
    let mut r = rng(o, 6);
    let draws = (o.samples / 20).max(50);
    let margin = (0..draws)
        .map(|_| {
            let alpha = r.gen_range(-1.3..1.3);
            let delta = C64::from_polar(r.gen_range(1e-4..0.05), alpha);
            let m_lo: u32 = r.gen_range(1..=20);
            let m_hi = m_lo + r.gen_range(1..=4000);
            let mut sum = C64::new(0.0, 0.0);
            let mut abs_sum = 0.0;
            for k in m_lo..=m_hi {
                let term = (-delta * f64::from(k)).exp() - 1.0;
                sum += term;
                abs_sum += term.norm();
            }
            sum.norm() / abs_sum - 0.5
        })
        .fold(f64::INFINITY, f64::min);
    Ok(margin_verdict(margin))
}

fn check_w_region(o: &VerifyOptions) -> Result<(bool, String)> {
    let mut r = rng(o, 7);
    let mut misses = 0usize;
    for _ in 0..o.samples {
        let alpha = r.gen_range(0.01..PI / 2.0 - 0.01) * if r.gen_bool(0.5) { 1.0 } else { -1.0 };
        let w = C64::from_polar(10f64.powf(r.gen_range(-3.0..2.0)), alpha);
        let z = 1.0 / (w.exp() - 1.0) + 0.5;
        if !w_region_contains(alpha, z) {
            misses += 1;
        }
    }
    Ok((misses == 0, format!("{misses} of {} points outside W_alpha", o.samples)))
}

/// Random `δ` with `|arg δ| < π/2`, a negative real `w` and a perturbation
/// `w̃` within `radius(|w|)` of it.
fn ratio_draw(r: &mut StdRng) -> (C64, f64, f64, f64) {
    let alpha = r.gen_range(-1.45..1.45);
    let delta = C64::from_polar(10f64.powf(r.gen_range(-3.0..0.3)), alpha);
    // keep |wδ| where Ψ' is representable
    let w = (-10f64.powf(r.gen_range(-2.0..3.0))).max(-200.0 / delta.norm());
    let e = r.gen_range(1e-3..1.0 - 1e-3);
    (delta, alpha, w, e)
}

fn check_exp_ratio(o: &VerifyOptions) -> Result<(bool, String)> {
    let mut r = rng(o, 8);
    let mut margin = f64::INFINITY;
    for _ in 0..o.samples {
        let (delta, alpha, w, e) = ratio_draw(&mut r);
        let rad = e * w.abs() * alpha.cos();
        let wt = w + unit_disk_point(&mut r, rad);
        let ratio = ((wt * delta).exp() - 1.0) / ((w * delta).exp() - 1.0);
        margin = margin.min(e - (ratio - 1.0).norm());
        let wt = w + unit_disk_point(&mut r, rad / 2.0);
        let ratio = ((w * delta).exp() - 1.0) / ((wt * delta).exp() - 1.0);
        margin = margin.min(e - (ratio - 1.0).norm());
    }
    Ok(margin_verdict(margin))
}

/// `K(α) = 4/cos α` is used for the radius `ε|w|/K(α)`.
fn check_psi_prime_ratio(o: &VerifyOptions) -> Result<(bool, String)> {
    let mut r = rng(o, 9);
    let mut margin = f64::INFINITY;
    for _ in 0..o.samples {
        let (delta, alpha, w, e) = ratio_draw(&mut r);
        let k = 4.0 / alpha.cos();
        let wt = C64::new(w, 0.0) + unit_disk_point(&mut r, e * w.abs() / k);
        let w = C64::new(w, 0.0);
        let bound = (e * (w * delta).norm()).exp() - 1.0 + e;
        let (a, b) = (psi_prime(delta, w)?, psi_prime(delta, wt)?);
        margin = margin.min(bound - (b / a - 1.0).norm()).min(bound - (a / b - 1.0).norm());
    }
    Ok(margin_verdict(margin))
}

// ---------------------------------------------------------------- fatou

fn check_psi_examples(_: &VerifyOptions) -> Result<(bool, String)> {
    let l2 = 2f64.ln();
    let e1 = (psi(C64::new(0.0, 0.0), C64::new(-1.0, 0.0))? - 1.0).norm();
    let e2 = (psi(C64::new(l2, 0.0), C64::new(-1.0, 0.0))? - l2).norm() / l2;
    // Ψ_δ → Ψ_0 = -1/w as δ → 0
    let w = C64::new(-3.0, 1.5);
    let e3 = (psi(C64::from_polar(1e-9, 0.4), w)? + 1.0 / w).norm();
    Ok((
        e1 < 1e-14 && e2 < 1e-14 && e3 < 1e-8,
        format!("errors {e1:.1e} {e2:.1e}, parabolic limit {e3:.1e}"),
    ))
}

fn check_round_trip(o: &VerifyOptions) -> Result<(bool, String)> {
    let mut r = rng(o, 10);
    let mut worst: f64 = 0.0;
    for _ in 0..o.samples {
        let delta = C64::from_polar(10f64.powf(r.gen_range(-3.0..0.0)), r.gen_range(-1.4..1.4));
        let x = C64::new(r.gen_range(-30.0..5.0), r.gen_range(-3.1..3.1));
        let w = x / delta;
        let back = phi_fatou(delta, psi(delta, w)?)?;
        worst = worst.max((back - w).norm() / w.norm().max(1.0));
    }
    Ok(verdict(worst, 1e-9, "relative error"))
}

fn check_psi_prime_forms(o: &VerifyOptions) -> Result<(bool, String)> {
    let mut r = rng(o, 11);
    let mut worst: f64 = 0.0;
    for _ in 0..o.samples {
        let delta = C64::from_polar(10f64.powf(r.gen_range(-3.0..0.0)), r.gen_range(-1.4..1.4));
        let x = C64::new(r.gen_range(-20.0..-0.05), r.gen_range(-3.0..3.0));
        let [a, b, c] = psi_prime_forms(delta, x / delta);
        worst = worst.max((a - c).norm() / c.norm()).max((b - c).norm() / c.norm());
    }
    Ok(verdict(worst, 1e-9, "relative spread"))
}

fn check_near_translation(_: &VerifyOptions) -> Result<(bool, String)> {
    let candidates = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0];
    let cases = [(0.0, 0.0), (0.005, PI / 6.0), (0.005, 0.0), (0.005, -PI / 4.0)];
    let found: Vec<Option<f64>> = cases
        .par_iter()
        .map(|&(t, a)| empirical_cutoff(C64::from_polar(t, a), PI / 4.0 - a.abs() / 2.0, 0.1, 100, &candidates))
        .collect();
    let ok = found.iter().all(Option::is_some);
    let detail = cases
        .iter()
        .zip(&found)
        .map(|((t, a), r)| format!("delta={t}e^(i{a:.3}): R={}", r.map_or("none".into(), |x| x.to_string())))
        .collect::<Vec<_>>()
        .join("; ");
    Ok((ok, detail))
}

// ---------------------------------------------------------------- cylinders

/// Smallest `N ≤ n_cap` with `pred(n)` for every `N < n ≤ n_max`.
fn fitted_threshold(n_max: u32, n_cap: u32, pred: impl Fn(u32) -> Result<bool>) -> Result<Option<u32>> {
    for n in (1..=n_max).rev() {
        if !pred(n)? {
            return Ok((n <= n_cap).then_some(n));
        }
    }
    Ok(Some(0))
}

fn check_size_vs_psi_prime(_: &VerifyOptions) -> Result<(bool, String)> {
    let cases = [(0.01, PI / 6.0), (0.02, PI / 6.0), (0.01, 0.0), (0.0, 0.0)];
    let n_cap = 100;
    let found: Vec<Result<Option<u32>>> = cases
        .par_iter()
        .map(|&(t, a)| {
            let delta = C64::from_polar(t, a);
            let table = build_table(delta, 12, TABLE_TOL)?;
            let n_max = if t > 0.0 { (6.0 / t) as u32 } else { 2000 };
            let sizes = table.cylinder_sizes(n_max)?;
            fitted_threshold(n_max, n_cap, |n| {
                let ratio = sizes[n as usize] / psi_prime(delta, C64::new(-f64::from(n), 0.0))?.norm();
                let env = (0.2 * f64::from(n) * t).exp() + 0.2;
                Ok(ratio < env && ratio > 1.0 / env)
            })
        })
        .collect();
    summarize_thresholds(&cases, found, n_cap)
}

fn summarize_thresholds(cases: &[(f64, f64)], found: Vec<Result<Option<u32>>>, cap: u32) -> Result<(bool, String)> {
    let mut ok = true;
    let mut parts = Vec::new();
    for ((t, a), f) in cases.iter().zip(found) {
        match f? {
            Some(n) => parts.push(format!("delta={t}e^(i{a:.3}): N={n}")),
            None => {
                ok = false;
                parts.push(format!("delta={t}e^(i{a:.3}): N>{cap}"));
            }
        }
    }
    Ok((ok, parts.join("; ")))
}

/// Smallest `K ≥ 1` with `g(K) ≥ target`, `g` increasing.
fn solve_increasing(target: f64, g: impl Fn(f64) -> f64) -> f64 {
    if g(1.0) >= target {
        return 1.0;
    }
    let (mut lo, mut hi) = (1.0, 2.0);
    while g(hi) < target {
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 {
            return f64::INFINITY;
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if g(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Smallest `K` with `K⁻¹ base e^{-Kx} < v < K base e^{-x/K}` (hyperbolic,
/// `x = n|δ| > 1`) or `K⁻¹ base < v < K base` (parabolic).
fn regime_constant(v: f64, base: f64, x: Option<f64>) -> f64 {
    let q = v / base;
    match x {
        None => q.max(1.0 / q),
        Some(x) => {
            let upper = solve_increasing(q, |k| k * (-x / k).exp());
            let lower = solve_increasing(1.0 / q, |k| k * (k * x).exp());
            upper.max(lower)
        }
    }
}

fn size_constant(table: &BoettcherTable, n_max: u32) -> Result<(f64, f64)> {
    let t = table.delta.norm();
    let sizes = table.cylinder_sizes(n_max)?;
    let (mut kp, mut kh) = (1.0f64, 1.0f64);
    for n in 1..=n_max {
        let x = f64::from(n) * t;
        let s = sizes[n as usize];
        if x <= 1.0 {
            kp = kp.max(regime_constant(s, f64::from(n * n).recip(), None));
        } else {
            kh = kh.max(regime_constant(s, t * t, Some(x)));
        }
    }
    Ok((kp, kh))
}

fn check_size_regimes(_: &VerifyOptions) -> Result<(bool, String)> {
    let cases = [(0.1, PI / 6.0), (0.05, PI / 6.0), (0.05, 0.0)];
    let ks: Vec<Result<(f64, f64)>> = cases
        .par_iter()
        .map(|&(t, a)| size_constant(&build_table(C64::from_polar(t, a), 12, TABLE_TOL)?, (8.0 / t) as u32))
        .collect();
    let mut ok = true;
    let mut parts = Vec::new();
    for ((t, a), k) in cases.iter().zip(ks) {
        let (kp, kh) = k?;
        ok &= kp.max(kh) < 20.0;
        parts.push(format!("delta={t}e^(i{a:.3}): K_par={kp:.2} K_hyp={kh:.2}"));
    }
    Ok((ok, parts.join("; ") + " (limit 20)"))
}

fn check_parabolic_sizes(_: &VerifyOptions) -> Result<(bool, String)> {
    let table = build_table(C64::new(0.0, 0.0), 12, TABLE_TOL)?;
    let sizes = table.cylinder_sizes(2000)?;
    let (lo, hi) = (1..=2000usize).fold((f64::INFINITY, 0.0f64), |(lo, hi), n| {
        let v = sizes[n] * (n * n) as f64;
        (lo.min(v), hi.max(v))
    });
    let tail = sizes[2000] * 4e6;
    Ok((
        lo > 0.05 && hi < 20.0 && (tail - 1.0).abs() < 0.05,
        format!("n^2|C_n| in [{lo:.3}, {hi:.3}], n=2000 value {tail:.4}"),
    ))
}

fn measure_constant(t: f64, alpha: f64, level: u32) -> Result<(f64, f64, f64)> {
    let delta = C64::from_polar(t, alpha);
    let table = build_table(delta, level, TABLE_TOL)?;
    let part = Arc::new(Partition::new(&table, level, auto_depth(delta))?);
    let root = bowen_root(part.clone(), 1e-11)?;
    let weights = equilibrium_of(&TransferOperator::new(part.clone(), root.tau0)?)?;
    let d = root.tau0;
    let n_max = (level + part.depth as u32 - 2).min((8.0 / t) as u32);
    let (mut kp, mut kh) = (1.0f64, 1.0f64);
    for n in 2..=n_max {
        let m = cylinder_measure(&part, &weights, n)?;
        let x = f64::from(n) * t;
        if x <= 1.0 {
            kp = kp.max(regime_constant(m, f64::from(n).powf(1.0 - 2.0 * d), None));
        } else {
            kh = kh.max(regime_constant(m, t.powf(2.0 * d - 1.0), Some(x)));
        }
    }
    Ok((d, kp, kh))
}

fn check_measure_regimes(_: &VerifyOptions) -> Result<(bool, String)> {
    let cases = [(0.05, 0.0), (0.05, PI / 6.0)];
    let ks: Vec<Result<(f64, f64, f64)>> = cases.par_iter().map(|&(t, a)| measure_constant(t, a, 12)).collect();
    let mut ok = true;
    let mut parts = Vec::new();
    for ((t, a), k) in cases.iter().zip(ks) {
        let (d, kp, kh) = k?;
        ok &= kp.max(kh) < 10.0;
        parts.push(format!("delta={t}e^(i{a:.3}) D={d:.5}: K_par={kp:.2} K_hyp={kh:.2}"));
    }
    Ok((ok, parts.join("; ") + " (limit 10)"))
}

// ---------------------------------------------------------------- transfer

fn check_circle_pressure(_: &VerifyOptions) -> Result<(bool, String)> {
    let table = build_table(C64::new(1.0, 0.0), 12, TABLE_TOL)?;
    let mut worst: f64 = 0.0;
    for tau in [0.5, 1.0, 1.5] {
        let p = pressure(&table, 12, tau)?;
        worst = worst.max((p - (1.0 - tau) * 2f64.ln()).abs());
    }
    Ok(verdict(worst, 1e-6, "error"))
}

fn check_pressure_oracle(_: &VerifyOptions) -> Result<(bool, String)> {
    let cases = [C64::new(0.8, 0.0), C64::from_polar(0.5, PI / 6.0), C64::new(0.3, 0.0)];
    let errs: Vec<Result<f64>> = cases
        .par_iter()
        .map(|&delta| {
            let table = build_table(delta, 16, TABLE_TOL)?;
            let mut worst: f64 = 0.0;
            for tau in [1.0, 1.1] {
                let p = pressure(&table, 16, tau)?;
                let q = pressure_oracle(&table, tau, 16)?;
                worst = worst.max((p - q).abs());
            }
            Ok(worst)
        })
        .collect();
    let worst = errs.into_iter().collect::<Result<Vec<_>>>()?.into_iter().fold(0.0, f64::max);
    Ok(verdict(worst, 5e-2, "difference"))
}

fn check_conjugation_symmetry(_: &VerifyOptions) -> Result<(bool, String)> {
    let delta = C64::from_polar(0.4, 0.7);
    let dims: Vec<Result<f64>> = [delta, delta.conj()]
        .par_iter()
        .map(|&d| Ok(dimension_at_level(&build_table(d, 12, TABLE_TOL)?, 12, auto_depth(d), 1e-11)?.tau0))
        .collect();
    let (a, b) = (dims[0].clone()?, dims[1].clone()?);
    Ok(verdict((a - b).abs(), 1e-9, "difference"))
}

fn check_level_stability(_: &VerifyOptions) -> Result<(bool, String)> {
    let delta = C64::new(0.5, 0.0);
    let table = build_table(delta, 16, TABLE_TOL)?;
    let bottom = 16 + auto_depth(delta);
    let dims: Vec<f64> = [10u32, 12, 14, 16]
        .par_iter()
        .map(|&l| Ok(dimension_at_level(&table, l, bottom - l as usize, 1e-11)?.tau0))
        .collect::<Result<_>>()?;
    let gaps: Vec<f64> = dims.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let shrinking = gaps.windows(2).all(|g| g[1] < g[0]);
    Ok((
        shrinking && gaps[2] < 1e-3,
        format!("dims {dims:.7?}, successive gaps {gaps:?}"),
    ))
}

fn check_stationarity(_: &VerifyOptions) -> Result<(bool, String)> {
    let delta = C64::from_polar(0.3, -0.4);
    let table = build_table(delta, 12, TABLE_TOL)?;
    let part = Arc::new(Partition::new(&table, 12, auto_depth(delta))?);
    let root = bowen_root(part.clone(), 1e-11)?;
    let op = TransferOperator::new(part, root.tau0)?;
    let w = equilibrium_of(&op)?;
    let stat = w.stationarity_residual(&op);
    let shift = w.shift_invariance_residual();
    let total: f64 = w.mu.iter().sum();
    Ok((
        stat < 1e-9 && shift < 1e-9 && (total - 1.0).abs() < 1e-12,
        format!("stationarity {stat:.1e}, shift invariance {shift:.1e}, mass {total:.15}"),
    ))
}

fn check_orbit_expansion(_: &VerifyOptions) -> Result<(bool, String)> {
    let table = build_table(C64::new(0.02, 0.0), 12, TABLE_TOL)?;
    let rep = orbit_expansion_check(&table, 8, 300, 16)?;
    Ok((
        rep.min_derivative > 1.0 && rep.min_ratio > 1e-3,
        format!("min |(f^k)'| {:.3}, min |(f^k)'|/k^2 {:.3e}", rep.min_derivative, rep.min_ratio),
    ))
}

// ---------------------------------------------------------------- perturbation

fn check_gamma_forms(o: &VerifyOptions) -> Result<(bool, String)> {
    let mut r = rng(o, 12);
    let mut worst: f64 = 0.0;
    for _ in 0..o.samples {
        let z = C64::from_polar(10f64.powf(r.gen_range(-2.0..1.0)), r.gen_range(-1.4..1.4));
        let [a, b, c] = gamma_forms(z);
        let scale = c.norm().max(1e-300);
        worst = worst.max((a - c).norm() / scale).max((b - c).norm() / scale);
    }
    Ok(verdict(worst, 1e-8, "relative spread"))
}

fn check_sinh_nonvanishing(_: &VerifyOptions) -> Result<(bool, String)> {
    let ok = sinh_z_minus_z_nonvanishing(2.0, 400)?;
    Ok((ok, "argument principle and grid floor on 0<|z|<=2".into()))
}

fn check_psi_dot_forms(_: &VerifyOptions) -> Result<(bool, String)> {
    let delta = C64::from_polar(0.05, PI / 6.0);
    let table = build_table(delta, 12, TABLE_TOL)?;
    let mut worst: f64 = 0.0;
    for n in [2u32, 10, 40, 100] {
        for z in table.cylinder_samples(n, 8)? {
            let p = psi_dot(delta, n, z);
            worst = worst.max((p.direct - p.orbit).norm() / p.direct.norm());
        }
    }
    Ok(verdict(worst, 1e-8, "relative difference"))
}

/// Fitted threshold `N ≤ cap` past which `|ψ̇/Γ − 1|` (`second = false`) or
/// `|(1+2ψ̇)/(1+2Γ) − 1|` (`second = true`) meets its envelope.
fn gamma_threshold(t: f64, alpha: f64, second: bool, cap: u32) -> Result<Option<u32>> {
    let delta = C64::from_polar(t, alpha);
    let table = build_table(delta, 12, TABLE_TOL)?;
    let eps = 0.2;
    let n_max = if second { (2.0 / t) as u32 } else { (6.0 / t) as u32 };
    fitted_threshold(n_max, cap, |n| {
        let nd = delta * f64::from(n);
        let (g, g2) = (gamma_fn(nd)?, one_plus_two_gamma(nd)?);
        let env = if second { eps } else { (eps * f64::from(n) * t).exp() - 1.0 + eps };
        for z in table.cylinder_samples(n, 6)? {
            let p = psi_dot(delta, n, z).direct;
            let err = if second { ((1.0 + 2.0 * p) / g2 - 1.0).norm() } else { (p / g - 1.0).norm() };
            if err >= env {
                return Ok(false);
            }
        }
        Ok(true)
    })
}

fn check_psi_dot_gamma(_: &VerifyOptions) -> Result<(bool, String)> {
    let cases = [(0.01, PI / 6.0), (0.02, -PI / 4.0), (0.1, PI / 6.0)];
    let found = cases.par_iter().map(|&(t, a)| gamma_threshold(t, a, false, 60)).collect();
    summarize_thresholds(&cases, found, 60)
}

fn check_psi_dot_gamma2(_: &VerifyOptions) -> Result<(bool, String)> {
    let cases = [(0.01, PI / 6.0), (0.02, -PI / 4.0), (0.01, 0.0)];
    let found = cases.par_iter().map(|&(t, a)| gamma_threshold(t, a, true, 60)).collect();
    summarize_thresholds(&cases, found, 60)
}

/// `φ̇` from the table against central differences of `φ_δ` in `δ`.
fn check_phi_dot_fd(_: &VerifyOptions) -> Result<(bool, String)> {
    let delta = C64::new(0.4, 0.0);
    let h = 1e-5;
    let level = 10;
    let tables: Vec<BoettcherTable> = [delta, delta + h, delta - h]
        .par_iter()
        .map(|&d| build_table(d, level, 1e-14))
        .collect::<Result<_>>()?;
    let dots = phi_dot_table(&tables[0])?;
    let worst = (0..tables[0].len())
        .map(|i| {
            let fd = (tables[1].points[i] - tables[2].points[i]) / (2.0 * h);
            (fd - dots[i]).norm()
        })
        .fold(0.0, f64::max);
    Ok(verdict(worst, 1e-4, "absolute difference"))
}

// ---------------------------------------------------------------- quadrature

fn check_omega_sign(_: &VerifyOptions) -> Result<(bool, String)> {
    let spec = QuadratureSpec::default();
    let mut worst = f64::NEG_INFINITY;
    for d0 in [1.05, 1.08, 1.2] {
        for i in 0..=8 {
            let theta = -1.0 + 0.25 * f64::from(i);
            let r = omega(theta, d0, &spec)?;
            if r.err_estimate >= 1e-8 {
                return Ok((false, format!("error estimate {:.1e} at theta={theta}", r.err_estimate)));
            }
            worst = worst.max(r.value);
        }
    }
    Ok((worst < 0.0, format!("largest value {worst:.6}")))
}

fn check_omega_even(_: &VerifyOptions) -> Result<(bool, String)> {
    let spec = QuadratureSpec::default();
    let mut worst: f64 = 0.0;
    for theta in [0.3, 1.0, 2.5] {
        let a = omega(theta, 1.08, &spec)?.value;
        let b = omega(-theta, 1.08, &spec)?.value;
        worst = worst.max((a - b).abs());
    }
    Ok(verdict(worst, 1e-13, "asymmetry"))
}

fn check_identity_chain(_: &VerifyOptions) -> Result<(bool, String)> {
    let spec = QuadratureSpec::default();
    let alphas = [0.0, PI / 6.0, PI / 4.0, 3.0 * PI / 8.0];
    let cases: Vec<(f64, f64)> = alphas.iter().flat_map(|&a| [1.05, 1.08, 1.2].map(|d| (a, d))).collect();
    let errs: Vec<Result<(f64, f64)>> = cases
        .par_iter()
        .map(|&(a, d0)| {
            let om = omega(a.tan(), d0, &spec)?.value;
            let da = delta_alpha(a, d0, 1.0, &spec)?.value;
            let q = q_integral(d0, a, 1.0, &spec)?.value;
            Ok(((da + 2f64.powf(-d0) * om).abs() / om.abs(), (q - da).abs() / da.abs()))
        })
        .collect();
    let (mut e1, mut e2) = (0.0f64, 0.0f64);
    for e in errs {
        let (a, b) = e?;
        e1 = e1.max(a);
        e2 = e2.max(b);
    }
    Ok((
        e1 < 1e-6 && e2 < 1e-6,
        format!("Delta vs Omega {e1:.2e}, int Q vs Delta {e2:.2e} (limit 1e-6)"),
    ))
}

fn check_theta0(_: &VerifyOptions) -> Result<(bool, String)> {
    let th = find_theta0(1.08, (0.5, 3.0), &QuadratureSpec::default())?;
    Ok(((1.15..=1.45).contains(&th), format!("theta0(1.08) = {th:.6}")))
}

fn check_step5(_: &VerifyOptions) -> Result<(bool, String)> {
    let mut worst = f64::INFINITY;
    for theta in [0.0, 0.25, 0.5, 0.75, 1.0] {
        for x in [0.05, 0.5, 2.0, 10.0] {
            let sums = step5_partial_sums(theta, x, 30);
            worst = worst.min(sums.iter().cloned().fold(f64::INFINITY, f64::min));
        }
    }
    Ok((worst >= -1e-15, format!("smallest partial sum {worst:.3e}")))
}
