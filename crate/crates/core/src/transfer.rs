//! Discretized Ruelle operator for the doubling map, pressure, Bowen root and
//! equilibrium weights.
//!
//! The circle is cut into a Markov partition for `s ↦ 2s`: the `2^N` uniform
//! words of length `N`, except that the two words touching angle `0` are
//! refined into the nested arcs `[2^{-m-1}, 2^{-m})` (and mirror images) down
//! to `m = N + K - 1`, followed by a residual arc containing `0`. Each state
//! carries the mean of `log|f'∘φ|` over its two endpoints as its potential.
//! With `K = 0` this is the plain uniform partition.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boettcher::BoettcherTable;
use crate::error::{Error, Result};
use crate::family::QuadMap;
use crate::perturbation::phi_dot_table;
use crate::C64;

const PAR_THRESHOLD: usize = 1 << 14;
pub const EIGEN_TOL: f64 = 1e-12;
pub const MAX_POWER_ITER: usize = 500_000;
pub const ROOT_TOL: f64 = 1e-10;
/// Cap on the refinement depth near the fixed point.
pub const MAX_DEPTH: usize = 2048;

/// Depth `K` whose deepest arc sits about `32/|δ|` doublings from angle 0,
/// where the repelling fixed point has taken over.
pub fn auto_depth(delta: C64) -> usize {
    let t = delta.norm();
    if t == 0.0 {
        return 512;
    }
    ((32.0 / t).ceil() as usize).clamp(16, MAX_DEPTH)
}

/// Markov partition with its node points and transition structure.
#[derive(Debug, Clone)]
pub struct Partition {
    pub delta: C64,
    pub level: u32,
    pub depth: usize,
    /// `φ` at the partition endpoints: `2^N` table points, then `K` points at
    /// angles `2^{-N-j}`, then `K` at `-2^{-N-j}`.
    nodes: Vec<C64>,
    /// node whose angle is twice this node's angle
    node_parent: Vec<u32>,
    ends: Vec<[u32; 2]>,
    pred: Vec<[u32; 2]>,
    succ_start: Vec<u32>,
    succ: Vec<u32>,
}

impl Partition {
    pub fn new(table: &BoettcherTable, level: u32, depth: usize) -> Result<Self> {
        if level > table.level {
            return Err(Error::LevelExceeded {
                requested: level,
                available: table.level,
            });
        }
        if level < 2 {
            return Err(Error::InvalidInput("partition level must be at least 2".into()));
        }
        if depth > MAX_DEPTH {
            return Err(Error::InvalidInput(format!("depth {depth} exceeds {MAX_DEPTH}")));
        }
        let m = 1usize << level;
        let k = depth;
        let stride = 1usize << (table.level - level);
        let mut nodes: Vec<C64> = table.points.iter().step_by(stride).copied().collect();
        let last = level + k as u32;
        if k > 0 {
            nodes.extend(table.fixed_point_chain(level + 1, last, true)?);
            nodes.extend(table.fixed_point_chain(level + 1, last, false)?);
        }
        let up = |j: usize| -> u32 {
            // node at angle 2^{-N-j}; j = 0 is table index 1
            if j == 0 {
                1
            } else {
                (m + j - 1) as u32
            }
        };
        let down = |j: usize| -> u32 {
            if j == 0 {
                (m - 1) as u32
            } else {
                (m + k + j - 1) as u32
            }
        };
        let mut node_parent: Vec<u32> = (0..m).map(|i| ((2 * i) % m) as u32).collect();
        for j in 1..=k {
            node_parent.push(up(j - 1));
        }
        for j in 1..=k {
            node_parent.push(down(j - 1));
        }

        // States: 0 = residual at 0+, m-1 = residual at 0-, 1..m-2 uniform,
        // m + j - 1 = arc [2^{-N-j}, 2^{-N-j+1}), m + k + j - 1 its mirror.
        let s = m + 2 * k;
        let up_state = |j: usize| if j > k { 0 } else { m + j - 1 };
        let down_state = |j: usize| if j > k { m - 1 } else { m + k + j - 1 };
        let mut ends = vec![[0u32; 2]; s];
        let mut pred = vec![[0u32; 2]; s];
        let half = m / 2;
        for i in 1..m - 1 {
            ends[i] = [i as u32, (i + 1) as u32];
            let a = i >> 1;
            let a = if a == 0 { up_state(1) } else { a };
            let b = a_mirror(i, half, m, &down_state);
            pred[i] = [a as u32, b as u32];
        }
        ends[0] = [0, up(k)];
        pred[0] = [0, half as u32];
        ends[m - 1] = [down(k), 0];
        pred[m - 1] = [(m - 1) as u32, (half - 1) as u32];
        for j in 1..=k {
            let st = up_state(j);
            ends[st] = [up(j), up(j - 1)];
            pred[st] = [up_state(j + 1) as u32, half as u32];
            let st = down_state(j);
            ends[st] = [down(j - 1), down(j)];
            pred[st] = [down_state(j + 1) as u32, (half - 1) as u32];
        }
        let mut count = vec![0u32; s + 1];
        for p in &pred {
            count[p[0] as usize + 1] += 1;
            count[p[1] as usize + 1] += 1;
        }
        for i in 0..s {
            count[i + 1] += count[i];
        }
        let succ_start = count.clone();
        let mut fill = count;
        let mut succ = vec![0u32; 2 * s];
        for (x, p) in pred.iter().enumerate() {
            for &y in p {
                succ[fill[y as usize] as usize] = x as u32;
                fill[y as usize] += 1;
            }
        }
        Ok(Partition {
            delta: table.delta,
            level,
            depth,
            nodes,
            node_parent,
            ends,
            pred,
            succ_start,
            succ,
        })
    }

    pub fn states(&self) -> usize {
        self.ends.len()
    }

    pub fn nodes(&self) -> &[C64] {
        &self.nodes
    }

    pub fn map(&self) -> QuadMap {
        QuadMap::f_delta(self.delta)
    }

    /// Mean of a node function over the two endpoints of each state.
    pub fn state_average(&self, node_values: &[f64]) -> Vec<f64> {
        self.ends
            .iter()
            .map(|[a, b]| 0.5 * (node_values[*a as usize] + node_values[*b as usize]))
            .collect()
    }

    /// `log|f'|` at every node.
    pub fn node_log_derivatives(&self) -> Result<Vec<f64>> {
        let f = self.map();
        let out: Vec<f64> = self.nodes.iter().map(|&z| f.eval_deriv(z).norm().ln()).collect();
        if out.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("a partition node sits on the critical point".into()));
        }
        Ok(out)
    }

    /// State potential `log|f'|`.
    pub fn potential(&self) -> Result<Vec<f64>> {
        Ok(self.state_average(&self.node_log_derivatives()?))
    }

    /// `∂φ/∂δ` at every node.
    pub fn node_phi_dots(&self, table: &BoettcherTable) -> Result<Vec<C64>> {
        let m = 1usize << self.level;
        let coarse = table.coarsen(self.level)?;
        let mut dots = phi_dot_table(&coarse)?;
        let f = self.map();
        for i in m..self.nodes.len() {
            let parent = dots[self.node_parent[i] as usize];
            let d = f.eval_deriv(self.nodes[i]);
            dots.push((self.delta / 2.0 + parent + 0.5) / d - 0.5);
        }
        Ok(dots)
    }

    /// States making up the arc `(2^{-n-2}, 2^{-n-1}]` and its mirror.
    pub fn cylinder_states(&self, n: u32) -> Result<Vec<usize>> {
        let m = 1usize << self.level;
        let n_max = self.level + self.depth as u32 - 2;
        if n > n_max || self.level < 2 {
            return Err(Error::LevelExceeded {
                requested: n + 2,
                available: self.level + self.depth as u32,
            });
        }
        if n + 2 <= self.level {
            let lo = m >> (n + 2);
            let hi = m >> (n + 1);
            Ok((lo..hi).chain(m - hi..m - lo).collect())
        } else {
            let j = (n + 2 - self.level) as usize;
            Ok(vec![m + j - 1, m + self.depth + j - 1])
        }
    }

    /// `z_n = φ(2^{-n-1})` for `n ≤ N + K - 1`.
    pub fn landing(&self, n: u32) -> Option<C64> {
        let m = 1usize << self.level;
        let e = n + 1;
        if e <= self.level {
            Some(self.nodes[m >> e])
        } else if (e - self.level) as usize <= self.depth {
            Some(self.nodes[m + (e - self.level) as usize - 1])
        } else {
            None
        }
    }
}

fn a_mirror(i: usize, half: usize, m: usize, down_state: &dyn Fn(usize) -> usize) -> usize {
    let b = (i >> 1) + half;
    if b == m - 1 {
        down_state(1)
    } else {
        b
    }
}

#[derive(Debug, Clone)]
pub struct TransferOperator {
    pub partition: Arc<Partition>,
    pub tau: f64,
    potential: Arc<Vec<f64>>,
    weights: Vec<f64>,
}

/// Leading eigenpair of a nonnegative operator.
#[derive(Debug, Clone)]
pub struct Perron {
    pub eigenvalue: f64,
    pub vector: Vec<f64>,
    pub iterations: usize,
}

impl TransferOperator {
    pub fn new(partition: Arc<Partition>, tau: f64) -> Result<Self> {
        let potential = Arc::new(partition.potential()?);
        Ok(Self::with_potential(partition, potential, tau))
    }

    fn with_potential(partition: Arc<Partition>, potential: Arc<Vec<f64>>, tau: f64) -> Self {
        let weights = potential.iter().map(|l| (-tau * l).exp()).collect();
        TransferOperator {
            partition,
            tau,
            potential,
            weights,
        }
    }

    pub fn with_tau(&self, tau: f64) -> Self {
        Self::with_potential(self.partition.clone(), self.potential.clone(), tau)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `(L u)[x] = Σ_{y → x} w_y u_y`.
    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        let w = &self.weights;
        let pred = &self.partition.pred;
        let kernel = |x: usize| {
            let [a, b] = pred[x];
            let (a, b) = (a as usize, b as usize);
            w[a] * u[a] + w[b] * u[b]
        };
        if out.len() >= PAR_THRESHOLD {
            out.par_iter_mut().enumerate().for_each(|(x, o)| *o = kernel(x));
        } else {
            out.iter_mut().enumerate().for_each(|(x, o)| *o = kernel(x));
        }
    }

    /// `(Lᵀ v)[y] = w_y Σ_{y → x} v_x`.
    pub fn apply_transpose(&self, v: &[f64], out: &mut [f64]) {
        let w = &self.weights;
        let p = &self.partition;
        let kernel = |y: usize| {
            let s = p.succ_start[y] as usize;
            let e = p.succ_start[y + 1] as usize;
            w[y] * p.succ[s..e].iter().map(|&x| v[x as usize]).sum::<f64>()
        };
        if out.len() >= PAR_THRESHOLD {
            out.par_iter_mut().enumerate().for_each(|(y, o)| *o = kernel(y));
        } else {
            out.iter_mut().enumerate().for_each(|(y, o)| *o = kernel(y));
        }
    }

    fn power(&self, transpose: bool, warm: Option<&[f64]>) -> Result<Perron> {
        let m = self.len();
        let mut u: Vec<f64> = match warm {
            Some(w) if w.len() == m && w.iter().all(|x| *x > 0.0 && x.is_finite()) => w.to_vec(),
            _ => vec![1.0; m],
        };
        normalize(&mut u);
        let mut next = vec![0.0; m];
        let mut spread = f64::INFINITY;
        for it in 1..=MAX_POWER_ITER {
            if transpose {
                self.apply_transpose(&u, &mut next);
            } else {
                self.apply(&u, &mut next);
            }
            // Collatz–Wielandt bounds bracket the Perron root.
            let (lo, hi) = u
                .iter()
                .zip(&next)
                .fold((f64::INFINITY, 0.0f64), |(lo, hi), (a, b)| {
                    let r = b / a;
                    (lo.min(r), hi.max(r))
                });
            let lambda = normalize(&mut next);
            std::mem::swap(&mut u, &mut next);
            spread = (hi - lo) / lambda;
            if spread < EIGEN_TOL {
                return Ok(Perron {
                    eigenvalue: lambda,
                    vector: u,
                    iterations: it,
                });
            }
        }
        Err(Error::NoConvergence {
            what: "power iteration",
            iterations: MAX_POWER_ITER,
            residual: spread,
        })
    }

    pub fn perron_right(&self, warm: Option<&[f64]>) -> Result<Perron> {
        self.power(false, warm)
    }

    pub fn perron_left(&self, warm: Option<&[f64]>) -> Result<Perron> {
        self.power(true, warm)
    }

    pub fn pressure(&self) -> Result<f64> {
        Ok(self.perron_right(None)?.eigenvalue.ln())
    }
}

/// Scale to unit ℓ1 norm and return the previous norm.
fn normalize(u: &mut [f64]) -> f64 {
    let s: f64 = u.iter().sum();
    u.iter_mut().for_each(|x| *x /= s);
    s
}

fn check_tau(tau: f64) -> Result<()> {
    if !(0.0..=2.5).contains(&tau) {
        return Err(Error::InvalidInput(format!("tau {tau} outside [0, 2.5]")));
    }
    Ok(())
}

/// Log of the Perron root at the given level with the default refinement.
pub fn pressure(table: &BoettcherTable, level: u32, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    let part = Arc::new(Partition::new(table, level, auto_depth(table.delta))?);
    TransferOperator::new(part, tau)?.pressure()
}

/// `(1/n) log Σ |(f^n)'(w)|^{-τ}` over the `2^n` preimages `w` of the point
/// at angle 1/2, by explicit enumeration.
pub fn pressure_oracle(table: &BoettcherTable, tau: f64, n: u32) -> Result<f64> {
    if n == 0 || n > 22 {
        return Err(Error::InvalidInput(format!("oracle depth {n} not in 1..=22")));
    }
    let f = table.map();
    let base = -(1.0 + table.delta);
    // Each leaf carries (point, log|(f^k)'|).
    let mut layer = vec![(base, 0.0f64)];
    for _ in 0..n {
        layer = layer
            .par_iter()
            .flat_map_iter(|&(z, ld)| {
                f.preimages(z)
                    .into_iter()
                    .map(move |w| (w, ld + f.eval_deriv(w).norm().ln()))
            })
            .collect();
    }
    let logs: Vec<f64> = layer.iter().map(|(_, ld)| -tau * ld).collect();
    Ok(log_sum_exp(&logs) / f64::from(n))
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let mx = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    mx + xs.iter().map(|x| (x - mx).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionResult {
    pub tau0: f64,
    pub pressure_residual: f64,
    pub level: u32,
    pub richardson_estimate: f64,
    pub error_bound: f64,
}

#[derive(Debug, Clone)]
pub struct BowenRoot {
    pub tau0: f64,
    pub pressure: f64,
    pub evaluations: usize,
}

/// Root of `τ ↦ P(τ)` on `[1, 2]` (Brent's method).
pub fn bowen_root(partition: Arc<Partition>, tol: f64) -> Result<BowenRoot> {
    let base = TransferOperator::new(partition, 1.0)?;
    let mut warm: Option<Vec<f64>> = None;
    let mut evals = 0usize;
    let mut p = |tau: f64| -> Result<f64> {
        evals += 1;
        let r = base.with_tau(tau).perron_right(warm.as_deref())?;
        warm = Some(r.vector);
        Ok(r.eigenvalue.ln())
    };
    // Near τ = 2 the Perron root approaches the self-loop weight of the
    // residual arc and power iteration slows to a crawl, so the bracket
    // [1, 1.5] is tried before the full [1, 2].
    let p15 = p(1.5)?;
    let hi = if p15 < 0.0 { 1.5 } else { 2.0 };
    let (tau0, pressure) = brent(&mut p, 1.0, hi, tol)?;
    Ok(BowenRoot {
        tau0,
        pressure,
        evaluations: evals,
    })
}

/// Brent's bracketing root finder; stops when `|f| ≤ ftol` or the bracket
/// collapses to rounding level.
pub(crate) fn brent<F>(f: &mut F, lo: f64, hi: f64, ftol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a)?, f(b)?);
    if fa.abs() <= ftol {
        return Ok((a, fa));
    }
    if fb.abs() <= ftol {
        return Ok((b, fb));
    }
    if fa.signum() == fb.signum() {
        return Err(Error::BracketFailure { low: fa, high: fb });
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 1e-15;
        let xm = 0.5 * (c - b);
        if fb.abs() <= ftol || xm.abs() <= tol1 {
            return Ok((b, fb));
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            if 2.0 * p < (3.0 * xm * q - (tol1 * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b)?;
    }
    Err(Error::NoConvergence {
        what: "root bracket",
        iterations: 200,
        residual: fb.abs(),
    })
}

/// Bowen root of a single partition built from the table.
pub fn dimension_at_level(table: &BoettcherTable, level: u32, depth: usize, tol: f64) -> Result<BowenRoot> {
    bowen_root(Arc::new(Partition::new(table, level, depth)?), tol)
}

/// Bowen root at `level`, plus level extrapolation from `level-2` and
/// `level-1`. All three partitions reach the same depth below angle 0.
pub fn hausdorff_dim(table: &BoettcherTable, level: u32, tol: f64) -> Result<DimensionResult> {
    if level < 4 {
        return Err(Error::InvalidInput("dimension needs level >= 4".into()));
    }
    let bottom = level as usize + auto_depth(table.delta);
    let roots: Vec<BowenRoot> = [level - 2, level - 1, level]
        .par_iter()
        .map(|&l| dimension_at_level(table, l, (bottom - l as usize).min(MAX_DEPTH), tol))
        .collect::<Result<_>>()?;
    let d = [roots[0].tau0, roots[1].tau0, roots[2].tau0];
    Ok(DimensionResult {
        tau0: d[2],
        pressure_residual: roots[2].pressure,
        level,
        richardson_estimate: extrapolate(d),
        error_bound: (d[2] - d[1]).abs(),
    })
}

/// First-order extrapolation of a sequence whose error halves per level.
pub fn extrapolate(d: [f64; 3]) -> f64 {
    2.0 * d[2] - d[1]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquilibriumWeights {
    pub level: u32,
    pub depth: usize,
    pub tau: f64,
    pub eigenvalue: f64,
    pub mu: Vec<f64>,
    pub omega: Vec<f64>,
    pub h: Vec<f64>,
}

pub fn equilibrium(table: &BoettcherTable, level: u32, tau: f64) -> Result<EquilibriumWeights> {
    check_tau(tau)?;
    let part = Arc::new(Partition::new(table, level, auto_depth(table.delta))?);
    equilibrium_of(&TransferOperator::new(part, tau)?)
}

pub fn equilibrium_of(op: &TransferOperator) -> Result<EquilibriumWeights> {
    let (right, left) = rayon::join(|| op.perron_right(None), || op.perron_left(None));
    let (right, left) = (right?, left?);
    let mut mu: Vec<f64> = right.vector.iter().zip(&left.vector).map(|(h, w)| h * w).collect();
    normalize(&mut mu);
    Ok(EquilibriumWeights {
        level: op.partition.level,
        depth: op.partition.depth,
        tau: op.tau,
        eigenvalue: right.eigenvalue,
        mu,
        omega: left.vector,
        h: right.vector,
    })
}

impl EquilibriumWeights {
    /// Largest violation of `μ(u) + μ(u + M/2) = μ(2u) + μ(2u+1)` over uniform
    /// words whose image and preimages are uniform words.
    pub fn shift_invariance_residual(&self) -> f64 {
        let m = 1usize << self.level;
        let half = m / 2;
        (1..half - 1)
            .map(|u| {
                let pre = self.mu[u] + self.mu[u + half];
                let fwd = self.mu[2 * u] + self.mu[2 * u + 1];
                (pre - fwd).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Largest violation of stationarity `μ_x = Σ_{y→x} μ_y P(y→x)` for the
    /// Markov chain `P(y→x) = w_y ω_x / (λ ω_y)`, over every state.
    pub fn stationarity_residual(&self, op: &TransferOperator) -> f64 {
        let w = op.weights();
        let lam = self.eigenvalue;
        op.partition
            .pred
            .iter()
            .enumerate()
            .map(|(x, p)| {
                let inflow: f64 = p
                    .iter()
                    .map(|&y| {
                        let y = y as usize;
                        self.mu[y] * w[y] * self.omega[x] / (lam * self.omega[y])
                    })
                    .sum();
                (inflow - self.mu[x]).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Mass of the arc `(1/2^{n+2}, 1/2^{n+1}]` turns and its mirror image.
pub fn cylinder_measure(partition: &Partition, weights: &EquilibriumWeights, n: u32) -> Result<f64> {
    Ok(partition
        .cylinder_states(n)?
        .into_iter()
        .map(|s| weights.mu[s])
        .sum())
}

/// Mass of the two residual arcs adjacent to angle 0.
pub fn cylinder_residual(weights: &EquilibriumWeights) -> f64 {
    let m = 1usize << weights.level;
    weights.mu[0] + weights.mu[m - 1]
}

/// `Σ μ log|f'(φ)|`.
pub fn lyapunov_integral(partition: &Partition, weights: &EquilibriumWeights) -> Result<f64> {
    let pot = partition.potential()?;
    Ok(weights.mu.iter().zip(&pot).map(|(m, l)| m * l).sum())
}

/// Terms of the derivative formula at a given parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativeReport {
    pub dimension: f64,
    pub lyapunov: f64,
    /// `Σ μ ∂_t log|f'(φ)|`
    pub variation: f64,
    pub derivative: f64,
}

/// Directional derivative of the dimension along `v` from the equilibrium
/// state at the Bowen root.
pub fn directional_derivative_formula(
    table: &BoettcherTable,
    partition: &Partition,
    v: C64,
    dimension: f64,
    weights: &EquilibriumWeights,
) -> Result<DerivativeReport> {
    if (v.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidInput("direction must be a unit complex number".into()));
    }
    let dots = partition.node_phi_dots(table)?;
    let f = partition.map();
    let rates: Vec<f64> = partition
        .nodes()
        .iter()
        .zip(&dots)
        .map(|(&z, &dz)| ((v + 2.0 * v * dz) / f.eval_deriv(z)).re)
        .collect();
    let variation: f64 = partition
        .state_average(&rates)
        .iter()
        .zip(&weights.mu)
        .map(|(r, m)| r * m)
        .sum();
    let lyapunov = lyapunov_integral(partition, weights)?;
    Ok(DerivativeReport {
        dimension,
        lyapunov,
        variation,
        derivative: -dimension * variation / lyapunov,
    })
}

/// Dimension and formula-based derivative along `δ/|δ|` at one parameter.
pub fn dimension_and_derivative(
    table: &BoettcherTable,
    level: u32,
    depth: usize,
    tol: f64,
) -> Result<DerivativeReport> {
    let part = Arc::new(Partition::new(table, level, depth)?);
    let root = bowen_root(part.clone(), tol)?;
    let w = equilibrium_of(&TransferOperator::new(part.clone(), root.tau0)?)?;
    let v = if table.delta.norm() > 0.0 {
        table.delta / table.delta.norm()
    } else {
        C64::new(1.0, 0.0)
    };
    directional_derivative_formula(table, &part, v, root.tau0, &w)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpansionReport {
    pub base_cylinder: u32,
    /// `(k, min |(f^k)'|, min |(f^k)'|/k²)` over the samples.
    pub rows: Vec<(u32, f64, f64)>,
    pub min_ratio: f64,
    pub min_derivative: f64,
}

/// Samples of the cylinder `𝒞_{N+k}` obtained by pulling points of `𝒞_N` back
/// `k` times along the inverse branch fixing `0`; reports how much `f^k`
/// expands on them.
pub fn orbit_expansion_check(
    table: &BoettcherTable,
    base: u32,
    k_max: u32,
    samples: usize,
) -> Result<ExpansionReport> {
    if base + 2 > table.level {
        return Err(Error::LevelExceeded {
            requested: base + 2,
            available: table.level,
        });
    }
    let f: QuadMap = table.map();
    let m = table.len();
    let lo = m >> (base + 2);
    let hi = m >> (base + 1);
    let step = ((hi - lo) / samples.max(1)).max(1);
    let starts: Vec<C64> = (lo..=hi).step_by(step).map(|i| table.points[i]).collect();
    let mut min_d = vec![f64::INFINITY; k_max as usize + 1];
    for &z0 in &starts {
        let mut z = z0;
        let mut log_d = 0.0;
        for slot in min_d.iter_mut().skip(1) {
            z = f.inverse_fixing_branch(z)?;
            log_d += f.eval_deriv(z).norm().ln();
            *slot = slot.min(log_d.exp());
        }
    }
    let rows: Vec<(u32, f64, f64)> = (1..=k_max)
        .map(|k| {
            let d = min_d[k as usize];
            (k, d, d / f64::from(k * k))
        })
        .collect();
    let min_ratio = rows.iter().map(|r| r.2).fold(f64::INFINITY, f64::min);
    let min_derivative = rows.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    Ok(ExpansionReport {
        base_cylinder: base,
        rows,
        min_ratio,
        min_derivative,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boettcher::build_table;
    use std::f64::consts::LN_2;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn op(delta: C64, level: u32, depth: usize, tau: f64) -> TransferOperator {
        let t = build_table(delta, level, 1e-13).unwrap();
        TransferOperator::new(Arc::new(Partition::new(&t, level, depth).unwrap()), tau).unwrap()
    }

    #[test]
    fn circle_pressure_is_linear() {
        let t = build_table(c(1.0, 0.0), 10, 1e-13).unwrap();
        for tau in [0.0, 0.5, 1.0, 1.5, 2.0] {
            let p = pressure(&t, 10, tau).unwrap();
            assert!((p - (1.0 - tau) * LN_2).abs() < 1e-10, "tau={tau} p={p}");
        }
    }

    #[test]
    fn circle_dimension_is_one() {
        let t = build_table(c(1.0, 0.0), 10, 1e-13).unwrap();
        let d = hausdorff_dim(&t, 10, ROOT_TOL).unwrap();
        assert!((d.tau0 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn partition_depth_zero_is_uniform() {
        let o = op(c(0.4, 0.2), 8, 0, 1.0);
        assert_eq!(o.len(), 256);
        let m = 256;
        for j in 0..m {
            let a = j >> 1;
            let mut got = o.partition.pred[j];
            got.sort();
            assert_eq!(got, [a as u32, (a + m / 2) as u32]);
        }
    }

    #[test]
    fn every_state_has_successors() {
        let o = op(c(0.3, 0.1), 6, 5, 1.0);
        let p = &o.partition;
        for y in 0..p.states() {
            assert!(p.succ_start[y + 1] > p.succ_start[y], "state {y}");
        }
    }

    #[test]
    fn transpose_is_adjoint() {
        for depth in [0, 7] {
            let o = op(c(0.4, 0.2), 8, depth, 1.1);
            let m = o.len();
            let u: Vec<f64> = (0..m).map(|i| ((i * 37 % 11) as f64) + 0.5).collect();
            let v: Vec<f64> = (0..m).map(|i| ((i * 13 % 7) as f64) + 0.25).collect();
            let mut lu = vec![0.0; m];
            let mut ltv = vec![0.0; m];
            o.apply(&u, &mut lu);
            o.apply_transpose(&v, &mut ltv);
            let a: f64 = v.iter().zip(&lu).map(|(x, y)| x * y).sum();
            let b: f64 = u.iter().zip(&ltv).map(|(x, y)| x * y).sum();
            assert!((a - b).abs() < 1e-10 * a.abs());
        }
    }

    #[test]
    fn pressure_decreasing() {
        let t = build_table(c(0.5, 0.1), 10, 1e-13).unwrap();
        let mut prev = f64::INFINITY;
        for i in 0..=20 {
            let p = pressure(&t, 10, 0.5 + 0.1 * i as f64).unwrap();
            assert!(p < prev);
            prev = p;
        }
    }

    #[test]
    fn oracle_circle() {
        let t = build_table(c(1.0, 0.0), 4, 1e-13).unwrap();
        assert!(pressure_oracle(&t, 1.0, 12).unwrap().abs() < 2e-2);
        let p0 = pressure_oracle(&t, 0.0, 9).unwrap();
        assert!((p0 - LN_2).abs() < 1e-12);
    }

    #[test]
    fn equilibrium_uniform_on_circle() {
        let t = build_table(c(1.0, 0.0), 8, 1e-13).unwrap();
        let part = Partition::new(&t, 8, 0).unwrap();
        let w = equilibrium_of(&TransferOperator::new(Arc::new(part.clone()), 1.0).unwrap()).unwrap();
        for m in &w.mu {
            assert!((m - 1.0 / 256.0).abs() < 1e-12);
        }
        assert!((lyapunov_integral(&part, &w).unwrap() - LN_2).abs() < 1e-12);
    }

    #[test]
    fn equilibrium_shift_invariant() {
        let o = op(c(0.3, 0.3), 10, 40, 1.05);
        let w = equilibrium_of(&o).unwrap();
        assert!((w.mu.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(w.shift_invariance_residual() < 1e-8);
        assert!(w.stationarity_residual(&o) < 1e-8);
        let p = &o.partition;
        let total: f64 = (0..=(10 + 40 - 2)).map(|n| cylinder_measure(p, &w, n).unwrap()).sum::<f64>()
            + cylinder_residual(&w);
        assert!((total - 1.0).abs() < 1e-12);
        assert!(cylinder_measure(p, &w, 10 + 40 - 1).is_err());
    }

    #[test]
    fn landing_matches_chain() {
        let t = build_table(c(0.3, 0.2), 12, 1e-13).unwrap();
        let p = Partition::new(&t, 8, 4).unwrap();
        for n in 0..11 {
            assert!((p.landing(n).unwrap() - t.z(n).unwrap()).norm() < 1e-12);
        }
        assert!(p.landing(12).is_none());
    }

    #[test]
    fn conjugate_parameter_same_dimension() {
        let d = c(0.4, 0.25);
        let a = build_table(d, 10, 1e-13).unwrap();
        let b = build_table(d.conj(), 10, 1e-13).unwrap();
        let da = dimension_at_level(&a, 10, 80, 1e-12).unwrap().tau0;
        let db = dimension_at_level(&b, 10, 80, 1e-12).unwrap().tau0;
        assert!((da - db).abs() < 1e-10);
    }

    #[test]
    fn bad_inputs_rejected() {
        let t = build_table(c(1.0, 0.0), 4, 1e-13).unwrap();
        assert!(pressure(&t, 4, 3.0).is_err());
        assert!(pressure(&t, 5, 1.0).is_err());
        assert!(Partition::new(&t, 4, MAX_DEPTH + 1).is_err());
    }
}
