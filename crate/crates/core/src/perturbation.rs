//! Parameter derivative of the boundary conjugacy and its model function.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::boettcher::{BoettcherTable, DyadicAngle};
use crate::error::{Error, Result};
use crate::C64;

const SMALL_G: f64 = 1e-4;
const SMALL_GAMMA: f64 = 1e-3;
pub const POLE_GUARD: f64 = 1e-10;
/// Truncation threshold on `|(f^m)'|`.
pub const SERIES_CUTOFF: f64 = 1e6;

/// `g(z) = e^{-z} - 1 + z`.
pub fn g_fn(z: C64) -> C64 {
    if z.norm() < SMALL_G {
        // z²/2 - z³/6 + z⁴/24 - z⁵/120
        let z2 = z * z;
        z2 * (0.5 + z * (-1.0 / 6.0 + z * (1.0 / 24.0 - z / 120.0)))
    } else {
        (-z).exp() - 1.0 + z
    }
}

fn near_pole(z: C64) -> bool {
    let k = (z.im / (2.0 * PI)).round();
    k != 0.0 && (z - C64::new(0.0, 2.0 * PI * k)).norm() < POLE_GUARD
}

/// `(sinh z - z)/(cosh z - 1)`, which equals `1 + 2Γ(z)`.
pub fn one_plus_two_gamma(z: C64) -> Result<C64> {
    if near_pole(z) {
        return Err(Error::Pole { at: z });
    }
    if z.norm() < SMALL_GAMMA {
        let z2 = z * z;
        return Ok(z * (1.0 / 3.0 + z2 * (-1.0 / 90.0 + z2 * (1.0 / 2520.0 - z2 / 75600.0))));
    }
    if z.re > 30.0 {
        // both hyperbolic functions overflow together; ratio tends to 1
        let e = (-z).exp();
        let num = 1.0 - e * e - 2.0 * z * e;
        let den = 1.0 + e * e - 2.0 * e;
        return Ok(num / den);
    }
    if z.re < -30.0 {
        return one_plus_two_gamma(-z).map(|w| -w);
    }
    Ok((z.sinh() - z) / (z.cosh() - 1.0))
}

/// `Γ(z) = (e^z - z e^z - 1)/(e^z - 1)²`, with `Γ(0) = -1/2`.
pub fn gamma_fn(z: C64) -> Result<C64> {
    Ok((one_plus_two_gamma(z)? - 1.0) / 2.0)
}

/// The three algebraic forms of `Γ`, evaluated directly (no series).
pub fn gamma_forms(z: C64) -> [C64; 3] {
    let a = 0.5 * (-1.0 + (z.sinh() - z) / (z.cosh() - 1.0));
    let b = 0.5 * (-g_fn(z) / (z.cosh() - 1.0));
    let e = z.exp();
    let c = (e - z * e - 1.0) / ((e - 1.0) * (e - 1.0));
    [a, b, c]
}

/// Samples `|sinh z - z| / |z|³` on a polar grid over `0 < |z| ≤ radius` and
/// returns the minimum.
pub fn sinh_minus_identity_floor(radius: f64, samples: usize) -> Result<f64> {
    if !(radius > 0.0 && radius <= 2.0) {
        return Err(Error::InvalidInput(format!("radius {radius} not in (0, 2]")));
    }
    let side = (samples as f64).sqrt().ceil().max(2.0) as usize;
    let mut floor = f64::INFINITY;
    for i in 1..=side {
        let r = radius * i as f64 / side as f64;
        for j in 0..side {
            let th = 2.0 * PI * j as f64 / side as f64;
            let z = C64::from_polar(r, th);
            let v = if r < 1e-2 {
                // z³/6 + z⁵/120 + z⁷/5040
                let z2 = z * z;
                z * z2 * (1.0 / 6.0 + z2 * (1.0 / 120.0 + z2 / 5040.0))
            } else {
                z.sinh() - z
            };
            floor = floor.min(v.norm() / (r * r * r));
        }
    }
    Ok(floor)
}

/// True when `sinh z - z` stays away from zero on the sampled disk.
pub fn sinh_z_minus_z_nonvanishing(radius: f64, samples: usize) -> Result<bool> {
    Ok(sinh_minus_identity_floor(radius, samples)? > 1e-3)
}

/// `∂φ/∂δ` at every table point, from the one-step recursion
/// `φ̇(s) + 1/2 = (δ/2 + φ̇(s²) + 1/2) / f'(φ(s))` seeded by `φ̇(1) = 0`.
/// Coarse angles are resolved before fine ones, so the recursion closes.
pub fn phi_dot_table(table: &BoettcherTable) -> Result<Vec<C64>> {
    let f = table.map();
    let delta = table.delta;
    let m = table.len();
    let mut dot = vec![C64::new(0.0, 0.0); m];
    for l in 1..=table.level {
        let stride = m >> l;
        for k in (1..(1usize << l)).step_by(2) {
            let i = k * stride;
            let d = f.eval_deriv(table.points[i]);
            if d == C64::new(0.0, 0.0) {
                return Err(Error::InvalidInput("table point on the critical point".into()));
            }
            dot[i] = (delta / 2.0 + dot[(2 * i) % m] + 0.5) / d - 0.5;
        }
    }
    Ok(dot)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesValue {
    pub value: C64,
    /// number of summed terms `m`
    pub terms: usize,
    /// `|δ/2 + 1/2| / |(f^m)'|`
    pub truncation_error: f64,
    /// the orbit reached angle 0, where the remainder is known exactly
    pub closed: bool,
}

/// Partial sum `-1/2 + Σ_{k≤m} (δ/2)/(f^k)'(φ(s))`.
///
/// Summation stops once `|(f^m)'|` exceeds [`SERIES_CUTOFF`], after
/// `max_terms`, or when the orbit of `s` lands on angle 0. In the last case
/// the remainder `(1/2)/(f^m)'` is added and the value is exact.
pub fn phi_dot_series(table: &BoettcherTable, s: DyadicAngle, max_terms: usize) -> Result<SeriesValue> {
    let f = table.map();
    let delta = table.delta;
    let m = table.len();
    let mut idx = s.index_at(table.level)?;
    let mut deriv = C64::new(1.0, 0.0);
    let mut sum = C64::new(-0.5, 0.0);
    let mut terms = 0;
    let mut closed = false;
    while terms < max_terms {
        deriv *= f.eval_deriv(table.points[idx]);
        sum += delta / 2.0 / deriv;
        terms += 1;
        idx = (2 * idx) % m;
        if idx == 0 {
            sum += 0.5 / deriv;
            closed = true;
            break;
        }
        if deriv.norm() > SERIES_CUTOFF {
            break;
        }
    }
    let truncation_error = if closed {
        0.0
    } else {
        (delta / 2.0 + 0.5).norm() / deriv.norm()
    };
    Ok(SeriesValue {
        value: sum,
        terms,
        truncation_error,
        closed,
    })
}

/// As [`phi_dot_series`] but never closes at angle 0: the orbit keeps
/// cycling at the fixed point and the remainder is always dropped.
pub fn phi_dot_series_open(table: &BoettcherTable, s: DyadicAngle, terms: usize) -> Result<SeriesValue> {
    let f = table.map();
    let delta = table.delta;
    let m = table.len();
    let mut idx = s.index_at(table.level)?;
    let mut deriv = C64::new(1.0, 0.0);
    let mut sum = C64::new(-0.5, 0.0);
    for _ in 0..terms {
        deriv *= f.eval_deriv(table.points[idx]);
        sum += delta / 2.0 / deriv;
        idx = (2 * idx) % m;
    }
    Ok(SeriesValue {
        value: sum,
        terms,
        truncation_error: (delta / 2.0 + 0.5).norm() / deriv.norm(),
        closed: false,
    })
}

/// Both forms of the principal part `ψ̇` at a point of the `n`-th cylinder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiDot {
    /// `-1/2 + Σ (δ/2)/(f^k)'(z)`
    pub direct: C64,
    /// `-Σ f^{k-1}(z)/(f^k)'(z) - (1/2)/(f^n)'(z)`
    pub orbit: C64,
}

pub fn psi_dot(delta: C64, n: u32, z: C64) -> PsiDot {
    let f = crate::family::QuadMap::f_delta(delta);
    let mut w = z;
    let mut deriv = C64::new(1.0, 0.0);
    let mut direct = C64::new(-0.5, 0.0);
    let mut orbit = C64::new(0.0, 0.0);
    for _ in 0..n {
        deriv *= f.eval_deriv(w);
        direct += delta / 2.0 / deriv;
        orbit -= w / deriv;
        w = f.eval(w);
    }
    orbit -= 0.5 / deriv;
    PsiDot { direct, orbit }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boettcher::build_table;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn g_examples() {
        assert_eq!(g_fn(c(0.0, 0.0)), c(0.0, 0.0));
        assert!((g_fn(c(1.0, 0.0)).re - (-1.0f64).exp()).abs() < 1e-15);
        let z = c(3e-5, 2e-5);
        let direct = (-z).exp() - 1.0 + z;
        assert!((g_fn(z) - direct).norm() < 1e-15);
    }

    #[test]
    fn gamma_examples() {
        assert_eq!(gamma_fn(c(0.0, 0.0)).unwrap(), c(-0.5, 0.0));
        let z = C64::from_polar(1e-4, 0.7);
        let r = one_plus_two_gamma(z).unwrap();
        assert!(((r - z / 3.0) / r).norm() < 1e-7);
        let big = C64::from_polar(1e3, std::f64::consts::FRAC_PI_4);
        assert!(gamma_fn(big).unwrap().norm() < 1e-2);
        assert_eq!(
            gamma_fn(c(0.0, 2.0 * PI)).unwrap_err().category(),
            "POLE"
        );
    }

    #[test]
    fn gamma_forms_agree() {
        for (r, a) in [(0.05, 0.3), (0.5, -1.0), (2.0, 0.4), (7.0, 1.2), (0.2, 3.0)] {
            let z = C64::from_polar(r, a);
            let [x, y, w] = gamma_forms(z);
            let s = gamma_fn(z).unwrap();
            for v in [x, y, w] {
                assert!((v - s).norm() < 1e-12 * s.norm().max(1.0), "z={z}");
            }
        }
    }

    #[test]
    fn gamma_series_limit_quadratic() {
        // (1+2Γ(z))·3/z - 1 ≈ -z²/30
        for r in [1e-2, 1e-3, 1e-4] {
            let z = C64::from_polar(r, 0.4);
            let e = (one_plus_two_gamma(z).unwrap() * 3.0 / z - 1.0).norm();
            assert!((e / (r * r) - 1.0 / 30.0).abs() < 1e-3, "r={r} e={e}");
        }
    }

    #[test]
    fn sinh_floor() {
        assert!(sinh_z_minus_z_nonvanishing(2.0, 10_000).unwrap());
        let f = sinh_minus_identity_floor(0.5, 10_000).unwrap();
        assert!(f > 0.15 && f < 1.0 / 6.0 + 1e-3);
    }

    #[test]
    fn phi_dot_circle_half() {
        let t = build_table(c(1.0, 0.0), 8, 1e-13).unwrap();
        let v = phi_dot_series_open(&t, DyadicAngle::s(0), 30).unwrap();
        assert!(v.truncation_error < 1e-6);
        // φ(1/2) = -(1+δ) moves with derivative -1
        assert!((v.value - c(-1.0, 0.0)).norm() < 1e-6);
        let closed = phi_dot_series(&t, DyadicAngle::s(0), 100).unwrap();
        assert!(closed.closed);
        assert!((closed.value - c(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn recursion_consistency() {
        let t = build_table(C64::from_polar(0.3, 0.4), 10, 1e-13).unwrap();
        let dots = phi_dot_table(&t).unwrap();
        let f = t.map();
        let m = t.len();
        for i in 1..m {
            let lhs = dots[i] + 0.5;
            let rhs = (t.delta / 2.0 + dots[(2 * i) % m] + 0.5) / f.eval_deriv(t.points[i]);
            assert!((lhs - rhs).norm() < 1e-10);
        }
        for k in [1u64, 3, 17, 255, 511, 1001] {
            let a = DyadicAngle::new(k, 10).unwrap();
            let s = phi_dot_series(&t, a, 1000).unwrap();
            if s.closed {
                assert!((s.value - dots[a.index_at(10).unwrap()]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn psi_dot_forms_agree() {
        let d = C64::from_polar(0.2, PI / 8.0);
        let t = build_table(d, 12, 1e-13).unwrap();
        for n in 1..10 {
            let z = t.points[(t.len() >> (n + 2)) + 1];
            let p = psi_dot(d, n, z);
            assert!((p.direct - p.orbit).norm() < 1e-10);
        }
    }
}
