//! Experiment drivers: ray scans, the `𝒟(0)` estimate, the `p_ε` probes and
//! the derivative cross-check. Rows run on the rayon pool; results keep the
//! input order.

use std::f64::consts::PI;

use hdim_core::boettcher::{build_table, build_table_from, BoettcherTable};
use hdim_core::error::{Error, Result};
use hdim_core::family::{in_main_disk, in_mandelbrot, in_mandelbrot_epsilon};
use hdim_core::quadrature::{omega, QuadratureSpec};
use hdim_core::transfer::{auto_depth, dimension_and_derivative, dimension_at_level, DerivativeReport};
use hdim_core::C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Tolerance used to build Böttcher tables.
pub const TABLE_TOL: f64 = 1e-13;
/// Bounds on `𝒟(0)` known a priori.
pub const D0_BOUNDS: (f64, f64) = (1.0, 1.295);

/// Geometric grid from `start` down to `end` (inclusive, up to rounding)
/// with ratio `1/√2`.
pub fn default_t_grid(start: f64, end: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut t = start;
    while t >= end * (1.0 - 1e-9) {
        out.push(t);
        t /= 2f64.sqrt();
    }
    out
}

/// `points` geometrically spaced values from `start` to `end`.
pub fn geometric_grid(start: f64, end: f64, points: usize) -> Result<Vec<f64>> {
    if points < 2 || !(start > 0.0 && end > 0.0) || start <= end {
        return Err(Error::InvalidInput("grid needs start > end > 0 and at least 2 points".into()));
    }
    let q = (end / start).powf(1.0 / (points - 1) as f64);
    Ok((0..points).map(|i| if i + 1 == points { end } else { start * q.powi(i as i32) }).collect())
}

/// Dimension and formula derivative at `δ`, with the partition depth chosen
/// for `depth_for` so nearby parameters share one discretization.
fn report_at(table: &BoettcherTable, level: u32, depth_for: C64, tol: f64) -> Result<DerivativeReport> {
    dimension_and_derivative(table, level, auto_depth(depth_for), tol)
}

/// Central difference of `𝒟` along `δ/|δ|` with step `h`, on tables
/// continued from `table`.
pub fn fd_derivative(table: &BoettcherTable, level: u32, h: f64, tol: f64) -> Result<f64> {
    let delta = table.delta;
    let v = delta / delta.norm();
    let depth = auto_depth(delta);
    let dims: Vec<f64> = [delta + v * h, delta - v * h]
        .par_iter()
        .map(|&d| Ok(dimension_at_level(&build_table_from(table, d, TABLE_TOL)?, level, depth, tol)?.tau0))
        .collect::<Result<_>>()?;
    Ok((dims[0] - dims[1]) / (2.0 * h))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RayScanConfig {
    pub alpha: f64,
    pub t_values: Vec<f64>,
    pub level: u32,
    pub tol: f64,
    pub d0: f64,
    /// Finite-difference step as a fraction of `t`; `None` skips the check.
    pub fd_step: Option<f64>,
    /// Number of smallest `t` used to fit `𝒜`.
    pub fit_points: usize,
}

impl RayScanConfig {
    fn validate(&self) -> Result<()> {
        if !(self.alpha.abs() < PI / 2.0) {
            return Err(Error::InvalidInput(format!("alpha {} not in (-pi/2, pi/2)", self.alpha)));
        }
        if self.t_values.is_empty() || self.t_values.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidInput("t values must be strictly decreasing".into()));
        }
        for &t in &self.t_values {
            let delta = C64::from_polar(t, self.alpha);
            if !(t > 0.0 && in_main_disk(delta)) {
                return Err(Error::OutsideMainDisk(delta));
            }
        }
        if !(self.d0 > 1.0 && self.d0 < 1.5) {
            return Err(Error::InvalidDimension(self.d0));
        }
        if self.fit_points == 0 || self.fit_points > self.t_values.len() {
            return Err(Error::InvalidInput("fit_points must be in 1..=number of t values".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RayRow {
    pub t: f64,
    pub dimension: f64,
    pub derivative: f64,
    pub derivative_fd: Option<f64>,
    pub ratio: f64,
    pub lyapunov: f64,
}

/// `r(t) = 𝒟'(tv)/t^{2𝒟(0)-2}`, the quantity emitted in every ray row.
pub fn ratio(derivative: f64, t: f64, d0: f64) -> f64 {
    derivative / t.powf(2.0 * d0 - 2.0)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RayScan {
    pub config: RayScanConfig,
    /// One entry per `t`; solver failures keep their slot as an error string.
    pub rows: Vec<std::result::Result<RayRow, String>>,
    pub omega: f64,
    /// `𝒜` fitted from `r(t) ≈ 𝒜 Ω(tan α)` over the smallest `t`.
    pub fitted_a: f64,
    /// `H_μ = 𝒜 χ 2^{𝒟(0)}/𝒟(0)` with `χ` from the smallest `t`.
    pub implied_h_mu: f64,
    /// `A = 2^{2𝒟(0)-2} 𝒜`.
    pub big_a: f64,
    /// `A` recomputed from `H_μ` through `2^{𝒟(0)-2} H_μ 𝒟(0)/χ`; must match `big_a`.
    pub big_a_check: f64,
    /// `r(t_min)/r(t') - 1` with `t'` the grid value closest to `2 t_min`.
    pub stability_doubling: f64,
    /// `r(t_min)/r(t_next) - 1` for the two smallest `t`.
    pub stability_consecutive: f64,
}

impl RayScan {
    pub fn ok_rows(&self) -> impl Iterator<Item = &RayRow> {
        self.rows.iter().filter_map(|r| r.as_ref().ok())
    }
}

fn ray_row(alpha: f64, t: f64, cfg: &RayScanConfig) -> Result<RayRow> {
    let delta = C64::from_polar(t, alpha);
    let table = build_table(delta, cfg.level, TABLE_TOL)?;
    let (rep, fd) = rayon::join(
        || report_at(&table, cfg.level, delta, cfg.tol),
        || cfg.fd_step.map(|s| fd_derivative(&table, cfg.level, s * t, cfg.tol)).transpose(),
    );
    let rep = rep?;
    Ok(RayRow {
        t,
        dimension: rep.dimension,
        derivative: rep.derivative,
        derivative_fd: fd?,
        ratio: ratio(rep.derivative, t, cfg.d0),
        lyapunov: rep.lyapunov,
    })
}

pub fn ray_scan(cfg: RayScanConfig) -> Result<RayScan> {
    cfg.validate()?;
    let rows: Vec<std::result::Result<RayRow, String>> = cfg
        .t_values
        .par_iter()
        .map(|&t| ray_row(cfg.alpha, t, &cfg).map_err(|e| format!("{}: {e}", e.category())))
        .collect();
    let good: Vec<&RayRow> = rows.iter().filter_map(|r| r.as_ref().ok()).collect();
    if good.len() < cfg.fit_points.max(2) {
        return Err(Error::NoConvergence {
            what: "ray scan (too few solved points)",
            iterations: rows.len(),
            residual: f64::NAN,
        });
    }
    let om = omega(cfg.alpha.tan(), cfg.d0, &QuadratureSpec::default())?.value;
    let tail = &good[good.len() - cfg.fit_points..];
    // least squares for r = 𝒜 Ω with Ω fixed
    let fitted_a = tail.iter().map(|r| r.ratio).sum::<f64>() / (cfg.fit_points as f64 * om);
    let last = good[good.len() - 1];
    let chi = last.lyapunov;
    let d0 = cfg.d0;
    let implied_h_mu = fitted_a * chi * 2f64.powf(d0) / d0;
    let big_a = 2f64.powf(2.0 * d0 - 2.0) * fitted_a;
    let big_a_check = 2f64.powf(d0 - 2.0) * implied_h_mu * d0 / chi;
    let partner = good
        .iter()
        .min_by(|a, b| {
            let da = (a.t / last.t - 2.0).abs();
            let db = (b.t / last.t - 2.0).abs();
            da.total_cmp(&db)
        })
        .expect("at least two rows");
    Ok(RayScan {
        omega: om,
        fitted_a,
        implied_h_mu,
        big_a,
        big_a_check,
        stability_doubling: last.ratio / partner.ratio - 1.0,
        stability_consecutive: last.ratio / good[good.len() - 2].ratio - 1.0,
        rows,
        config: cfg,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct D0Estimate {
    pub value: f64,
    /// `|estimate from the two finest t − estimate from the two coarsest|`.
    pub stability: f64,
    /// Same estimate two levels down, minus `value`.
    pub level_sensitivity: f64,
    pub exponent: f64,
    pub t_values: Vec<f64>,
    pub dimensions: Vec<f64>,
    pub within_bounds: bool,
    pub level: u32,
}

/// `𝒟(t)` on the real ray at `level`.
pub fn real_ray_dimensions(t_values: &[f64], level: u32, tol: f64) -> Result<Vec<f64>> {
    t_values
        .par_iter()
        .map(|&t| {
            let delta = C64::new(t, 0.0);
            let table = build_table(delta, level, TABLE_TOL)?;
            Ok(dimension_at_level(&table, level, auto_depth(delta), tol)?.tau0)
        })
        .collect()
}

/// Richardson estimates of `lim 𝒟(t)` from consecutive halvings, assuming
/// `𝒟(t) = 𝒟(0) - c t^γ` with `γ = 2𝒟(0) - 1` solved self-consistently.
fn richardson(t: &[f64], d: &[f64]) -> Result<(Vec<f64>, f64)> {
    let mut gamma = 1.0;
    let mut est = Vec::new();
    for _ in 0..100 {
        est = t
            .windows(2)
            .zip(d.windows(2))
            .map(|(tw, dw)| {
                let q = (tw[0] / tw[1]).powf(gamma);
                dw[1] + (dw[1] - dw[0]) / (q - 1.0)
            })
            .collect();
        let next = 2.0 * est[est.len() - 1] - 1.0;
        if (next - gamma).abs() < 1e-12 {
            gamma = next;
            break;
        }
        gamma = next;
    }
    if !gamma.is_finite() || gamma <= 0.0 {
        return Err(Error::NoConvergence {
            what: "Richardson exponent",
            iterations: 100,
            residual: gamma,
        });
    }
    Ok((est, gamma))
}

pub fn d0_estimate(level: u32, t_values: &[f64], tol: f64) -> Result<D0Estimate> {
    if t_values.len() < 3 || t_values.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidInput("need at least three decreasing t values".into()));
    }
    if level < 6 {
        return Err(Error::InvalidInput("d0 estimate needs level >= 6".into()));
    }
    let (dims, coarse) = rayon::join(
        || real_ray_dimensions(t_values, level, tol),
        || real_ray_dimensions(t_values, level - 2, tol),
    );
    let (dims, coarse) = (dims?, coarse?);
    let (est, gamma) = richardson(t_values, &dims)?;
    let (est_coarse, _) = richardson(t_values, &coarse)?;
    let value = est[est.len() - 1];
    Ok(D0Estimate {
        value,
        stability: (value - est[est.len() - 2]).abs(),
        level_sensitivity: est_coarse[est_coarse.len() - 1] - value,
        exponent: gamma,
        t_values: t_values.to_vec(),
        dimensions: dims,
        within_bounds: value > D0_BOUNDS.0 && value < D0_BOUNDS.1,
        level,
    })
}

/// `δ = 2√(-ε)` on the real ray, the `p_ε` parameter matching `ε < 0`.
pub fn delta_of_epsilon(eps: f64) -> f64 {
    2.0 * (-eps).sqrt()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpsilonRow {
    pub epsilon: f64,
    pub dimension: f64,
    /// `d'(ε) = -𝒟'(δ)/√(-ε)`
    pub derivative: f64,
}

pub fn epsilon_row(eps: f64, level: u32, tol: f64) -> Result<EpsilonRow> {
    if !(eps < 0.0 && eps > -0.25) {
        return Err(Error::InvalidInput(format!("epsilon {eps} not in (-1/4, 0)")));
    }
    let delta = C64::new(delta_of_epsilon(eps), 0.0);
    let table = build_table(delta, level, TABLE_TOL)?;
    let rep = report_at(&table, level, delta, tol)?;
    Ok(EpsilonRow {
        epsilon: eps,
        dimension: rep.dimension,
        derivative: -rep.derivative / (-eps).sqrt(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingFit {
    pub rows: Vec<EpsilonRow>,
    pub slope: f64,
    pub target: f64,
}

/// Least-squares slope of `log|d'(ε)|` against `log(-ε)` on log-spaced `ε`.
pub fn hz_slope(eps_far: f64, eps_near: f64, points: usize, level: u32, tol: f64, d0: f64) -> Result<ScalingFit> {
    let mags = geometric_grid(-eps_far, -eps_near, points)?;
    let rows: Vec<EpsilonRow> = mags.par_iter().map(|&m| epsilon_row(-m, level, tol)).collect::<Result<_>>()?;
    let xs: Vec<f64> = rows.iter().map(|r| (-r.epsilon).ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.derivative.abs().ln()).collect();
    Ok(ScalingFit {
        slope: least_squares_slope(&xs, &ys),
        target: d0 - 1.5,
        rows,
    })
}

pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvexityRow {
    pub epsilon: f64,
    pub dimension: f64,
    pub second_difference: f64,
    pub second_difference_half: f64,
    /// `|d''(h) / d''(h/2) - 1|`
    pub halving_change: f64,
    /// `|d''| h²` is within a hundred solver tolerances.
    pub noisy: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Convexity {
    pub rows: Vec<ConvexityRow>,
    pub step: f64,
    pub all_positive: bool,
}

/// Second central differences of `d(ε)` at step `h` and `h/2`.
pub fn convexity_probe(eps_values: &[f64], step: f64, level: u32, tol: f64) -> Result<Convexity> {
    if !(step > 0.0) {
        return Err(Error::InvalidInput("step must be positive".into()));
    }
    let dim = |eps: f64| -> Result<f64> {
        if !(eps < 0.0 && eps > -0.25) {
            return Err(Error::InvalidInput(format!("epsilon {eps} not in (-1/4, 0)")));
        }
        let delta = C64::new(delta_of_epsilon(eps), 0.0);
        let table = build_table(delta, level, TABLE_TOL)?;
        Ok(dimension_at_level(&table, level, auto_depth(delta), tol)?.tau0)
    };
    let rows: Vec<ConvexityRow> = eps_values
        .par_iter()
        .map(|&e| {
            let pts = [e - step, e - step / 2.0, e, e + step / 2.0, e + step];
            let d: Vec<f64> = pts.par_iter().map(|&x| dim(x)).collect::<Result<_>>()?;
            let full = (d[4] - 2.0 * d[2] + d[0]) / (step * step);
            let half = (d[3] - 2.0 * d[2] + d[1]) / (step * step / 4.0);
            Ok(ConvexityRow {
                epsilon: e,
                dimension: d[2],
                second_difference: full,
                second_difference_half: half,
                halving_change: (full / half - 1.0).abs(),
                noisy: full.abs() * step * step < 100.0 * tol,
            })
        })
        .collect::<Result<_>>()?;
    let all_positive = rows.iter().all(|r| r.second_difference > 0.0 && r.second_difference_half > 0.0);
    Ok(Convexity { rows, step, all_positive })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FdCheckRow {
    pub delta: C64,
    pub formula: f64,
    pub finite_difference: f64,
    pub relative_error: f64,
}

/// Derivative formula against central differences along `δ/|δ|`.
pub fn fd_check(deltas: &[C64], level: u32, tol: f64) -> Result<Vec<FdCheckRow>> {
    deltas
        .par_iter()
        .map(|&delta| {
            let table = build_table(delta, level, TABLE_TOL)?;
            let (rep, fd) = rayon::join(
                || report_at(&table, level, delta, tol),
                || fd_derivative(&table, level, delta.norm() / 100.0, tol),
            );
            let (rep, fd) = (rep?, fd?);
            Ok(FdCheckRow {
                delta,
                formula: rep.derivative,
                finite_difference: fd,
                relative_error: ((rep.derivative - fd) / fd).abs(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parametrization {
    Delta,
    Epsilon,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MandelbrotCell {
    pub family: Parametrization,
    pub re: f64,
    pub im: f64,
    pub inside: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub re: (f64, f64),
    pub im: (f64, f64),
    pub nx: usize,
    pub ny: usize,
}

impl Grid {
    fn points(&self) -> Result<Vec<(f64, f64)>> {
        if self.nx < 2 || self.ny < 2 || !(self.re.0 < self.re.1 && self.im.0 < self.im.1) {
            return Err(Error::InvalidInput("grid needs increasing ranges and at least 2x2 points".into()));
        }
        let at = |(a, b): (f64, f64), n: usize, i: usize| a + (b - a) * i as f64 / (n - 1) as f64;
        Ok((0..self.ny)
            .flat_map(|j| (0..self.nx).map(move |i| (i, j)))
            .map(|(i, j)| (at(self.re, self.nx, i), at(self.im, self.ny, j)))
            .collect())
    }
}

/// Membership of every grid point in `M` (`f_δ`) or `𝓜` (`p_ε`).
pub fn mandelbrot_grid(family: Parametrization, grid: &Grid, max_iter: usize) -> Result<Vec<MandelbrotCell>> {
    grid.points()?
        .par_iter()
        .map(|&(re, im)| {
            let c = C64::new(re, im);
            let inside = match family {
                Parametrization::Delta => in_mandelbrot(c, max_iter, 4.0)?,
                Parametrization::Epsilon => in_mandelbrot_epsilon(c, max_iter, 4.0)?,
            };
            Ok(MandelbrotCell { family, re, im, inside })
        })
        .collect()
}
