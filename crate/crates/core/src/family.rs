//! The two quadratic families `f_δ(z) = (1+δ)z + z²` and
//! `p_ε(z) = z² + 1/4 + ε`, related by the affine conjugacy
//! `τ_δ(z) = z + (1+δ)/2` whenever `ε = -δ²/4`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::C64;

/// Default escape radius for critical-orbit membership tests.
pub const ESCAPE_RADIUS: f64 = 4.0;
/// Default iteration cap for membership tests.
pub const MAX_ITER: usize = 10_000;

const BRANCH_REL_TOL: f64 = 1e-12;

/// A point of parameter space. Only `δ` is stored; `ε` and the polar
/// decomposition are always recomputed from it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Param {
    delta: C64,
}

impl Param {
    pub fn new(delta: C64) -> Self {
        Param { delta }
    }

    /// Parameter on the ray `t·e^{iα}`.
    pub fn from_polar(t: f64, alpha: f64) -> Self {
        Param::new(C64::from_polar(t, alpha))
    }

    /// The `δ` with non-negative real part such that `-δ²/4 = ε`.
    pub fn from_epsilon(epsilon: C64) -> Self {
        Param::new(2.0 * (-epsilon).sqrt())
    }

    pub fn delta(&self) -> C64 {
        self.delta
    }

    pub fn epsilon(&self) -> C64 {
        -self.delta * self.delta / 4.0
    }

    pub fn t(&self) -> f64 {
        self.delta.norm()
    }

    /// `arg δ`, folded into `(-π/2, π/2]` using the symmetry `δ ↔ -δ`.
    pub fn alpha(&self) -> f64 {
        let d = if self.delta.re < 0.0 || (self.delta.re == 0.0 && self.delta.im < 0.0) {
            -self.delta
        } else {
            self.delta
        };
        d.arg()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    /// `(1+δ)z + z²`
    FDelta,
    /// `z² + 1/4 + ε`
    PEpsilon,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadMap {
    pub family: Family,
    pub param: Param,
}

impl QuadMap {
    pub fn f_delta(delta: C64) -> Self {
        QuadMap {
            family: Family::FDelta,
            param: Param::new(delta),
        }
    }

    pub fn p_epsilon(epsilon: C64) -> Self {
        QuadMap {
            family: Family::PEpsilon,
            param: Param::from_epsilon(epsilon),
        }
    }

    #[inline]
    pub fn eval(&self, z: C64) -> C64 {
        match self.family {
            Family::FDelta => (1.0 + self.param.delta) * z + z * z,
            Family::PEpsilon => z * z + 0.25 + self.param.epsilon(),
        }
    }

    #[inline]
    pub fn eval_deriv(&self, z: C64) -> C64 {
        match self.family {
            Family::FDelta => (1.0 + self.param.delta) + 2.0 * z,
            Family::PEpsilon => 2.0 * z,
        }
    }

    pub fn critical_point(&self) -> C64 {
        match self.family {
            Family::FDelta => -(1.0 + self.param.delta) / 2.0,
            Family::PEpsilon => C64::new(0.0, 0.0),
        }
    }

    /// Both fixed points. For `FDelta` these are `0` and `-δ`.
    pub fn fixed_points(&self) -> [C64; 2] {
        match self.family {
            Family::FDelta => [C64::new(0.0, 0.0), -self.param.delta],
            Family::PEpsilon => {
                let d = self.param.delta;
                // τ_δ(0) and τ_δ(-δ)
                [(1.0 + d) / 2.0, (1.0 - d) / 2.0]
            }
        }
    }

    /// The two solutions of `map(w) = z`, in no particular order.
    pub fn preimages(&self, z: C64) -> [C64; 2] {
        match self.family {
            Family::FDelta => {
                let c = -(1.0 + self.param.delta) / 2.0;
                let r = (c * c + z).sqrt();
                [c + r, c - r]
            }
            Family::PEpsilon => {
                let r = (z - 0.25 - self.param.epsilon()).sqrt();
                [r, -r]
            }
        }
    }

    /// The preimage of `z` closest to `hint`.
    pub fn inverse_branch(&self, z: C64, hint: C64) -> Result<C64> {
        let [a, b] = self.preimages(z);
        let da = (a - hint).norm();
        let db = (b - hint).norm();
        let separation = (a - b).norm();
        if separation > 0.0 && (da - db).abs() <= BRANCH_REL_TOL * da.max(db) {
            return Err(Error::AmbiguousBranch { target: z, hint });
        }
        Ok(if da <= db { a } else { b })
    }

    /// Inverse branch of `f_δ` that fixes both `0` and `-δ`, i.e. the principal
    /// square-root branch. Fails near the critical value where the branch cut
    /// lies.
    pub fn inverse_fixing_branch(&self, z: C64) -> Result<C64> {
        let delta = self.param.delta;
        let c = -(1.0 + delta) / 2.0;
        let disc = c * c + z;
        if disc.re <= 0.0 && disc.im.abs() <= 1e-12 * (1.0 + disc.norm()) {
            return Err(Error::WrongBranch { at: z });
        }
        let w = c + disc.sqrt();
        match self.family {
            Family::FDelta => Ok(w),
            Family::PEpsilon => Ok(conjugate_to_p(w, delta)),
        }
    }
}

/// `τ_δ(z) = z + (1+δ)/2`, carrying `f_δ` to `p_{-δ²/4}`.
#[inline]
pub fn conjugate_to_p(z: C64, delta: C64) -> C64 {
    z + (1.0 + delta) / 2.0
}

#[inline]
pub fn conjugate_from_p(z: C64, delta: C64) -> C64 {
    z - (1.0 + delta) / 2.0
}

/// Critical-orbit membership test in the `δ`-plane. The orbit is run in the
/// `p_ε` normalization with `ε = -δ²/4`.
pub fn in_mandelbrot(delta: C64, max_iter: usize, escape_radius: f64) -> Result<bool> {
    if max_iter < 1 {
        return Err(Error::InvalidInput("max_iter must be at least 1".into()));
    }
    if !(escape_radius >= 4.0) {
        return Err(Error::InvalidInput("escape_radius must be at least 4".into()));
    }
    let c = 0.25 + Param::new(delta).epsilon();
    Ok(critical_orbit_bounded(c, max_iter, escape_radius))
}

/// Same test in the `ε`-plane.
pub fn in_mandelbrot_epsilon(epsilon: C64, max_iter: usize, escape_radius: f64) -> Result<bool> {
    in_mandelbrot(Param::from_epsilon(epsilon).delta(), max_iter, escape_radius)
}

fn critical_orbit_bounded(c: C64, max_iter: usize, escape_radius: f64) -> bool {
    let r2 = escape_radius * escape_radius;
    let mut z = C64::new(0.0, 0.0);
    for _ in 0..max_iter {
        z = z * z + c;
        if z.norm_sqr() > r2 {
            return false;
        }
    }
    true
}

/// `δ ∈ B(1,1)`, the component where `-δ` is attracting.
pub fn in_main_disk(delta: C64) -> bool {
    (delta - 1.0).norm() < 1.0
}
