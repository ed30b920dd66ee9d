//! Approximate Fatou coordinates near the fixed points `0` and `-δ`.
//!
//! `Ψ_δ(w) = δ/(e^{-wδ} - 1)` solves `ż = z(z+δ)`, the flow whose time-one
//! map approximates `f_δ`; `Φ_δ` is its principal-branch inverse.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::QuadMap;
use crate::C64;

/// Below this `|wδ|` the removable singularity is handled by series.
pub const SERIES_SWITCH: f64 = 1e-4;
const POLE_TOL: f64 = 1e-12;

fn is_zero(delta: C64) -> bool {
    delta.re == 0.0 && delta.im == 0.0
}

fn check_pole(delta: C64, w: C64) -> Result<()> {
    if is_zero(delta) {
        if w.norm() == 0.0 {
            return Err(Error::Pole { at: w });
        }
        return Ok(());
    }
    let x = w * delta;
    let k = (x.im / (2.0 * PI)).round();
    if k != 0.0 && (x - C64::new(0.0, 2.0 * PI * k)).norm() < POLE_TOL {
        return Err(Error::Pole { at: w });
    }
    if x.norm() == 0.0 {
        return Err(Error::Pole { at: w });
    }
    Ok(())
}

/// `Ψ_δ(w)`; `Ψ_0(w) = -1/w`.
pub fn psi(delta: C64, w: C64) -> Result<C64> {
    check_pole(delta, w)?;
    let x = w * delta;
    if x.norm() < SERIES_SWITCH {
        // -1/w · B(-x) with B(y) = y/(e^y - 1)
        let x2 = x * x;
        let b = 1.0 + x / 2.0 + x2 * (1.0 / 12.0 + x2 * (-1.0 / 720.0 + x2 / 30240.0));
        return Ok(-b / w);
    }
    Ok(delta / ((-x).exp() - 1.0))
}

/// `Φ_δ(z) = -(1/δ) log(1 + δ/z)` on the principal branch; `Φ_0(z) = -1/z`.
///
/// `Φ_δ(Ψ_δ(w)) = w` holds whenever `|Im(wδ)| < π`.
pub fn phi_fatou(delta: C64, z: C64) -> Result<C64> {
    if z.norm() == 0.0 || (z + delta).norm() == 0.0 {
        return Err(Error::Pole { at: z });
    }
    if is_zero(delta) {
        return Ok(-1.0 / z);
    }
    let u = delta / z;
    if u.norm() < SERIES_SWITCH {
        // log(1+u)/u = 1 - u/2 + u²/3 - u³/4 + u⁴/5
        let s = 1.0 + u * (-0.5 + u * (1.0 / 3.0 + u * (-0.25 + u / 5.0)));
        return Ok(-s / z);
    }
    let arg = 1.0 + u;
    if arg.re <= 0.0 && arg.im.abs() <= 1e-15 * arg.norm().max(1.0) {
        return Err(Error::BranchCut { arg });
    }
    Ok(-arg.ln() / delta)
}

/// `Ψ_δ'(w) = ((δ/2)/sinh(wδ/2))²`.
pub fn psi_prime(delta: C64, w: C64) -> Result<C64> {
    check_pole(delta, w)?;
    let x = w * delta;
    if x.norm() < SERIES_SWITCH {
        // (y/sinh y)² with y = x/2
        let y2 = x * x / 4.0;
        let r = 1.0 + y2 * (-1.0 / 6.0 + y2 * (7.0 / 360.0 - y2 * 31.0 / 15120.0));
        return Ok(r * r / (w * w));
    }
    let s = (delta / 2.0) / (x / 2.0).sinh();
    Ok(s * s)
}

/// The three closed forms of `Ψ_δ'` evaluated without series, `δ ≠ 0`.
pub fn psi_prime_forms(delta: C64, w: C64) -> [C64; 3] {
    let x = w * delta;
    let a = delta / ((-x).exp() - 1.0);
    let b = delta / (x.exp() - 1.0);
    let c = (delta / 2.0) / (x / 2.0).sinh();
    [a * a * (-x).exp(), b * b * x.exp(), c * c]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    /// `Φ_δ ∘ f_δ ∘ Ψ_δ`
    Forward,
    /// `Φ_δ ∘ f_δ⁻¹ ∘ Ψ_δ` with the inverse branch fixing `0` and `-δ`.
    Backward,
}

/// One step of the near-translation `F_δ^{±1}` in Fatou coordinates.
pub fn fatou_step(delta: C64, w: C64, direction: Direction) -> Result<C64> {
    let map = QuadMap::f_delta(delta);
    let z = psi(delta, w)?;
    let image = match direction {
        Direction::Forward => map.eval(z),
        Direction::Backward => map.inverse_fixing_branch(z)?,
    };
    phi_fatou(delta, image)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SectorKind {
    /// Opening around the positive real axis.
    Plus,
    /// Opening around the negative real axis.
    Minus,
}

/// `S^±(θ, r)`, optionally intersected with `{|Re z| > cutoff}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sector {
    pub kind: SectorKind,
    pub half_angle: f64,
    pub radius: f64,
    pub cutoff: Option<f64>,
}

impl Sector {
    pub fn new(kind: SectorKind, half_angle: f64) -> Self {
        Sector {
            kind,
            half_angle,
            radius: f64::INFINITY,
            cutoff: None,
        }
    }

    pub fn with_radius(mut self, radius: f64) -> Self {
        self.radius = radius;
        self
    }

    pub fn with_cutoff(mut self, cutoff: f64) -> Self {
        self.cutoff = Some(cutoff);
        self
    }

    pub fn contains(&self, z: C64) -> bool {
        sector_contains(self, z)
    }
}

/// Argument in `[-π/2, 3π/2)`.
fn arg_shifted(z: C64) -> f64 {
    let a = z.arg();
    if a < -PI / 2.0 {
        a + 2.0 * PI
    } else {
        a
    }
}

pub fn sector_contains(s: &Sector, z: C64) -> bool {
    if z.norm() == 0.0 || !(z.norm() < s.radius) {
        return false;
    }
    let a = arg_shifted(z);
    let centre = match s.kind {
        SectorKind::Plus => 0.0,
        SectorKind::Minus => PI,
    };
    if (a - centre).abs() >= s.half_angle {
        return false;
    }
    match s.cutoff {
        Some(r) => z.re.abs() > r,
        None => true,
    }
}

/// Membership in `W_α`: `|arg z| < |α|` and `Re z` above `1/4` or
/// `(1/4)cot|α|`, whichever applies to `|α|`.
pub fn w_region_contains(alpha: f64, z: C64) -> bool {
    let a = alpha.abs();
    if z.norm() == 0.0 || z.arg().abs() >= a {
        return false;
    }
    let floor = if a <= PI / 4.0 { 0.25 } else { 0.25 / a.tan() };
    z.re > floor
}

/// Worst observed deviation of `F_δ^{-n}(w)` from `w - n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TranslationDefect {
    /// `max_n |F^{-n}(w) - (w-n)| / n`.
    pub max_ratio: f64,
    /// Whether every iterate stayed inside the sector.
    pub stayed_in_sector: bool,
    pub steps: usize,
}

/// Iterates `F_δ^{-1}` from `w` for `steps` steps inside `sector`.
pub fn translation_defect(delta: C64, w: C64, steps: usize, sector: &Sector) -> Result<TranslationDefect> {
    let mut cur = w;
    let mut max_ratio: f64 = 0.0;
    let mut inside = sector.contains(w);
    for n in 1..=steps {
        cur = fatou_step(delta, cur, Direction::Backward)?;
        inside &= sector.contains(cur);
        let dev = (cur - (w - n as f64)).norm() / n as f64;
        max_ratio = max_ratio.max(dev);
    }
    Ok(TranslationDefect {
        max_ratio,
        stayed_in_sector: inside,
        steps,
    })
}

/// Grid of sample points in `S^-(θ)_R ∩ {|w| < R + span}`.
pub fn sector_grid(half_angle: f64, cutoff: f64, span: f64, radial: usize, angular: usize) -> Vec<C64> {
    let mut out = Vec::with_capacity(radial * angular);
    for i in 0..radial {
        let re = cutoff + span * (i as f64 + 0.5) / radial as f64;
        for j in 0..angular {
            let frac = (j as f64 + 0.5) / angular as f64 * 2.0 - 1.0;
            // stay strictly inside the opening
            let im = re * (0.95 * half_angle).tan() * frac;
            out.push(C64::new(-re, im));
        }
    }
    out
}

/// Smallest cutoff `R` from `candidates` for which every grid point keeps all
/// `steps` backward iterates inside `S^-(θ)_R` with defect below `eps`.
pub fn empirical_cutoff(delta: C64, half_angle: f64, eps: f64, steps: usize, candidates: &[f64]) -> Option<f64> {
    candidates.iter().copied().find(|&r| {
        let sector = Sector::new(SectorKind::Minus, half_angle).with_cutoff(r);
        sector_grid(half_angle, r, 4.0 * r.max(1.0), 6, 7).into_iter().all(|w| {
            matches!(translation_defect(delta, w, steps, &sector),
                Ok(d) if d.stayed_in_sector && d.max_ratio < eps)
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn psi_examples() {
        assert_relative_eq!(psi(c(0.0, 0.0), c(-1.0, 0.0)).unwrap().re, 1.0);
        let l2 = 2f64.ln();
        let v = psi(c(l2, 0.0), c(-1.0, 0.0)).unwrap();
        assert_relative_eq!(v.re, l2, max_relative = 1e-14);
        assert!(v.im.abs() < 1e-15);
    }

    #[test]
    fn psi_small_delta_limit() {
        let delta = c(1e-8, 0.0);
        for w in sector_grid(PI / 4.0, 0.5, 50.0, 10, 9) {
            let diff = psi(delta, w).unwrap() - (-1.0 / w);
            assert!(diff.norm() < 1e-6);
        }
    }

    #[test]
    fn psi_series_matches_direct_at_switch() {
        let delta = c(0.3, 0.2);
        let w = c(-1.0, 0.5) * (1.01 * SERIES_SWITCH / (c(-1.0, 0.5) * delta).norm());
        let direct = delta / ((-(w * delta)).exp() - 1.0);
        let inside = w * 0.98;
        let series = psi(delta, inside).unwrap();
        let direct_inside = delta / ((-(inside * delta)).exp() - 1.0);
        assert!((series - direct_inside).norm() / series.norm() < 1e-8);
        assert!(direct.norm() > 0.0);
    }

    #[test]
    fn poles_rejected() {
        let delta = c(0.1, 0.0);
        let w = c(0.0, 2.0 * PI / 0.1);
        assert!(matches!(psi(delta, w), Err(Error::Pole { .. })));
        assert!(matches!(psi_prime(delta, w), Err(Error::Pole { .. })));
        assert!(matches!(psi(c(0.0, 0.0), c(0.0, 0.0)), Err(Error::Pole { .. })));
    }

    #[test]
    fn phi_examples() {
        assert_relative_eq!(phi_fatou(c(0.0, 0.0), c(1.0, 0.0)).unwrap().re, -1.0);
        let delta = C64::from_polar(0.1, PI / 6.0);
        let z = psi(delta, c(-5.0, 0.0)).unwrap();
        let w = phi_fatou(delta, z).unwrap();
        assert!((w - c(-5.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn phi_branch_cut() {
        // 1 + δ/z = -1 at z = -δ/2
        let delta = c(0.2, 0.0);
        assert!(matches!(phi_fatou(delta, c(-0.1, 0.0)), Err(Error::BranchCut { .. })));
        assert!(matches!(phi_fatou(delta, -delta), Err(Error::Pole { .. })));
    }

    #[test]
    fn psi_prime_examples() {
        assert_relative_eq!(psi_prime(c(0.0, 0.0), c(-2.0, 0.0)).unwrap().re, 0.25);
        let delta = C64::from_polar(0.05, 0.3);
        for n in [1.0, 7.0, 40.0] {
            let expected = {
                let q = delta / ((n * delta).exp() - 1.0);
                q * q * (n * delta).exp()
            };
            let got = psi_prime(delta, c(-n, 0.0)).unwrap();
            assert!((got - expected).norm() / expected.norm() < 1e-12);
        }
    }

    #[test]
    fn fatou_step_parabolic_translation() {
        let w = c(-1e6, 0.0);
        let back = fatou_step(c(0.0, 0.0), w, Direction::Backward).unwrap();
        assert!((back - (w - 1.0)).norm() < 1e-4);
    }

    #[test]
    fn fatou_step_round_trip() {
        let delta = C64::from_polar(0.02, PI / 6.0);
        for w in sector_grid(PI / 6.0, 5.0, 30.0, 5, 5) {
            let b = fatou_step(delta, w, Direction::Backward).unwrap();
            let f = fatou_step(delta, b, Direction::Forward).unwrap();
            assert!((f - w).norm() < 1e-10 * w.norm().max(1.0), "{w} -> {f}");
        }
    }

    #[test]
    fn near_translation_on_ray() {
        let alpha = PI / 6.0;
        let theta = PI / 4.0 - alpha / 2.0;
        for delta in [c(0.0, 0.0), C64::from_polar(0.005, alpha)] {
            let r = empirical_cutoff(delta, theta, 0.1, 100, &[1.0, 2.0, 4.0, 8.0, 16.0, 32.0]);
            assert!(r.is_some(), "no cutoff for {delta}");
        }
    }

    #[test]
    fn sector_examples() {
        let plus = Sector::new(SectorKind::Plus, PI / 4.0);
        assert!(plus.contains(c(1.0, 0.5)));
        let minus = Sector::new(SectorKind::Minus, PI / 4.0);
        assert!(minus.contains(c(-3.0, 1.0)));
        assert!(minus.contains(c(-3.0, -1.0)));
        assert!(!minus.contains(c(3.0, 1.0)));
        let cut = Sector::new(SectorKind::Plus, PI / 4.0).with_cutoff(2.0);
        assert!(!cut.contains(c(1.0, 0.0)));
        assert!(cut.contains(c(3.0, 0.0)));
        assert!(!plus.with_radius(1.0).contains(c(2.0, 0.0)));
    }

    #[test]
    fn w_region_examples() {
        assert!(w_region_contains(PI / 4.0, c(1.0, 0.0)));
        assert!(w_region_contains(PI / 3.0, c(0.2, 0.0)));
        assert!(!w_region_contains(PI / 6.0, c(0.2, 0.0)));
    }

    proptest! {
        #[test]
        fn phi_inverts_psi(r in 0.01f64..0.8, a in -1.4f64..1.4, xr in -30.0f64..5.0, xi in -3.1f64..3.1) {
            let delta = C64::from_polar(r, a);
            let w = c(xr, xi) / delta;
            prop_assume!(w.norm() > 1e-3);
            let z = psi(delta, w).unwrap();
            let back = phi_fatou(delta, z).unwrap();
            prop_assert!((back - w).norm() < 1e-10 * w.norm().max(1.0));
        }

        #[test]
        fn psi_prime_forms_agree(r in 0.01f64..0.8, a in -1.4f64..1.4, wr in -40.0f64..-0.1, wi in -5.0f64..5.0) {
            let delta = C64::from_polar(r, a);
            let w = c(wr, wi);
            prop_assume!((w * delta).norm() > SERIES_SWITCH);
            let [x, y, z] = psi_prime_forms(delta, w);
            let v = psi_prime(delta, w).unwrap();
            for f in [x, y, z] {
                prop_assert!((f - v).norm() <= 1e-12 * v.norm() * 10.0);
            }
        }

        #[test]
        fn psi_prime_ratio_identity(r in 0.01f64..0.5, a in -1.2f64..1.2, w1 in -20.0f64..-0.5, w2 in -20.0f64..-0.5, i2 in -2.0f64..2.0) {
            let delta = C64::from_polar(r, a);
            let w = c(w1, 0.0);
            let wt = c(w2, i2);
            let lhs = psi_prime(delta, wt).unwrap() / psi_prime(delta, w).unwrap();
            let s = (w * delta / 2.0).sinh() / (wt * delta / 2.0).sinh();
            prop_assert!((lhs - s * s).norm() <= 1e-11 * lhs.norm());
        }
    }
}
