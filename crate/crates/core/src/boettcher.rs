//! Boundary conjugacy between angle doubling on the circle and `f_δ` on its
//! Julia set, sampled at dyadic angles.
//!
//! Tables are built by pulling points back one level at a time. At each new
//! level the two preimages of a known point are disambiguated using the
//! midpoint of the two angular neighbours already in the table.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{in_main_disk, QuadMap};
use crate::C64;

pub const MAX_LEVEL: u32 = 24;
pub const MAX_SWEEPS: usize = 500;

/// The angle `k / 2^level` turns, stored in lowest terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DyadicAngle {
    numerator: u64,
    level: u32,
}

impl DyadicAngle {
    pub fn new(numerator: u64, level: u32) -> Result<Self> {
        if level > 62 {
            return Err(Error::InvalidInput(format!("angle level {level} too large")));
        }
        let mut k = numerator % (1u64 << level);
        let mut l = level;
        while l > 0 && k.is_multiple_of(2) {
            k /= 2;
            l -= 1;
        }
        if k == 0 {
            l = 0;
        }
        Ok(DyadicAngle { numerator: k, level: l })
    }

    pub fn zero() -> Self {
        DyadicAngle { numerator: 0, level: 0 }
    }

    /// `s_n = e^{πi/2^n}`, which is `1/2^{n+1}` turns.
    pub fn s(n: u32) -> Self {
        DyadicAngle { numerator: 1, level: n + 1 }
    }

    pub fn numerator(&self) -> u64 {
        self.numerator
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn turns(&self) -> f64 {
        self.numerator as f64 / (1u64 << self.level) as f64
    }

    /// The image under `s ↦ s²`.
    pub fn doubled(&self) -> Self {
        DyadicAngle::new(2 * self.numerator, self.level).expect("level already valid")
    }

    /// Index of this angle in a table of the given level.
    pub fn index_at(&self, level: u32) -> Result<usize> {
        if self.level > level {
            return Err(Error::LevelExceeded {
                requested: self.level,
                available: level,
            });
        }
        Ok((self.numerator << (level - self.level)) as usize)
    }
}

/// Image `f_δ(φ(s))` is stored at index `2k mod 2^N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoettcherTable {
    pub delta: C64,
    pub level: u32,
    pub tol: f64,
    pub residual: f64,
    pub points: Vec<C64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cylinder {
    pub index: u32,
    pub endpoints: (C64, C64),
    pub size: f64,
}

fn check_param(delta: C64, level: u32, tol: f64) -> Result<()> {
    if !(delta == C64::new(0.0, 0.0) || in_main_disk(delta) || (delta - 1.0).norm() <= 1.0 + 1e-12) {
        return Err(Error::OutsideMainDisk(delta));
    }
    if !(1..=MAX_LEVEL).contains(&level) {
        return Err(Error::InvalidInput(format!("table level {level} not in 1..={MAX_LEVEL}")));
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidInput("tolerance must be positive".into()));
    }
    Ok(())
}

/// Build the level-`level` table for `f_δ`.
pub fn build_table(delta: C64, level: u32, tol: f64) -> Result<BoettcherTable> {
    check_param(delta, level, tol)?;
    let f = QuadMap::f_delta(delta);
    let m = 1usize << level;
    let mut pts = vec![C64::new(0.0, 0.0); m];
    pts[m / 2] = -(1.0 + delta);
    if level >= 2 {
        let (q1, q3) = quarter_points(delta);
        pts[m / 4] = q1;
        pts[3 * m / 4] = q3;
    }
    for l in 3..=level {
        let stride = m >> l;
        let count = 1usize << l;
        for k in (1..count).step_by(2) {
            let i = k * stride;
            let lo = pts[(k - 1) * stride];
            let hi = pts[((k + 1) % count) * stride];
            let hint = (lo + hi) / 2.0;
            pts[i] = f.inverse_branch(pts[(2 * i) % m], hint)?;
        }
    }
    finish(f, pts, level, tol)
}

/// Build the table at `delta` using an existing table (same level) as branch
/// hints. Used to track the motion of points under small parameter changes.
pub fn build_table_from(seed: &BoettcherTable, delta: C64, tol: f64) -> Result<BoettcherTable> {
    let level = seed.level;
    check_param(delta, level, tol)?;
    let f = QuadMap::f_delta(delta);
    let m = 1usize << level;
    let mut pts = vec![C64::new(0.0, 0.0); m];
    for l in 1..=level {
        let stride = m >> l;
        let count = 1usize << l;
        for k in (1..count).step_by(2) {
            let i = k * stride;
            pts[i] = f.inverse_branch(pts[(2 * i) % m], seed.points[i])?;
        }
    }
    finish(f, pts, level, tol)
}

/// The two level-2 points. The midpoint hint coincides with the critical
/// point there, so the angle-1/4 point is fixed by orientation instead: it is
/// the root of `w² + (1+δ)w + (1+δ) = 0` on the positive side of the real
/// axis after rotating by `1+δ`.
fn quarter_points(delta: C64) -> (C64, C64) {
    let b = 1.0 + delta;
    let r = (b * b - 4.0 * b).sqrt();
    let w1 = (-b + r) / 2.0;
    let w2 = (-b - r) / 2.0;
    if (w1 / b).im > 0.0 {
        (w1, w2)
    } else {
        (w2, w1)
    }
}

fn finish(f: QuadMap, mut pts: Vec<C64>, level: u32, tol: f64) -> Result<BoettcherTable> {
    let m = pts.len();
    let diam = diameter(&pts);
    let mut converged = false;
    let mut last = f64::INFINITY;
    for _ in 0..MAX_SWEEPS {
        let mut moved = 0.0f64;
        for i in 1..m {
            if i == m / 2 {
                continue;
            }
            let new = f.inverse_branch(pts[(2 * i) % m], pts[i])?;
            moved = moved.max((new - pts[i]).norm());
            pts[i] = new;
        }
        last = moved;
        if moved < tol * diam {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            what: "table refinement",
            iterations: MAX_SWEEPS,
            residual: last,
        });
    }
    let residual = semiconjugacy_residual(f, &pts);
    Ok(BoettcherTable {
        delta: f.param.delta(),
        level,
        tol,
        residual,
        points: pts,
    })
}

fn semiconjugacy_residual(f: QuadMap, pts: &[C64]) -> f64 {
    let m = pts.len();
    (0..m)
        .map(|k| (f.eval(pts[k]) - pts[(2 * k) % m]).norm())
        .fold(0.0, f64::max)
}

/// Diagonal of the bounding box, a cheap stand-in for the diameter.
fn diameter(pts: &[C64]) -> f64 {
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for p in pts {
        x0 = x0.min(p.re);
        x1 = x1.max(p.re);
        y0 = y0.min(p.im);
        y1 = y1.max(p.im);
    }
    ((x1 - x0).powi(2) + (y1 - y0).powi(2)).sqrt().max(f64::MIN_POSITIVE)
}

impl BoettcherTable {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn map(&self) -> QuadMap {
        QuadMap::f_delta(self.delta)
    }

    pub fn diameter(&self) -> f64 {
        diameter(&self.points)
    }

    pub fn landing_point(&self, angle: DyadicAngle) -> Result<C64> {
        Ok(self.points[angle.index_at(self.level)?])
    }

    /// `z_n = φ(s_n)`.
    pub fn z(&self, n: u32) -> Result<C64> {
        self.landing_point(DyadicAngle::s(n))
    }

    /// Cylinders `0..=n_max` with endpoints `z_n`, `z_{n+1}`.
    pub fn cylinders(&self, n_max: u32) -> Result<Vec<Cylinder>> {
        if n_max + 2 > self.level {
            return Err(Error::LevelExceeded {
                requested: n_max + 2,
                available: self.level,
            });
        }
        (0..=n_max)
            .map(|n| {
                let a = self.z(n)?;
                let b = self.z(n + 1)?;
                Ok(Cylinder {
                    index: n,
                    endpoints: (a, b),
                    size: (a - b).norm(),
                })
            })
            .collect()
    }

    /// `φ(2^{-m})` (or `φ(-2^{-m})` when `upper` is false) for
    /// `m = first..=last`. Angles finer than the table are reached by pulling
    /// back along the inverse branch that fixes `0`, which halves angles near
    /// zero.
    pub fn fixed_point_chain(&self, first: u32, last: u32, upper: bool) -> Result<Vec<C64>> {
        if first == 0 || first > self.level + 1 {
            return Err(Error::InvalidInput(format!(
                "chain must start at an exponent in 1..={}",
                self.level + 1
            )));
        }
        let f = self.map();
        let m = self.len();
        let mut out = Vec::with_capacity(last.saturating_sub(first) as usize + 1);
        let coarse = (m >> (first - 1)) % m;
        let mut prev = self.points[if upper { coarse } else { (m - coarse) % m }];
        for e in first..=last {
            let z = if e <= self.level {
                let i = m >> e;
                self.points[if upper { i } else { m - i }]
            } else {
                f.inverse_fixing_branch(prev)?
            };
            out.push(z);
            prev = z;
        }
        Ok(out)
    }

    pub fn julia_cloud(&self) -> &[C64] {
        &self.points
    }

    /// Sizes `|z_n - z_{n+1}|` for `n = 0..=n_max`, following the landing
    /// chain past the table resolution when needed.
    pub fn cylinder_sizes(&self, n_max: u32) -> Result<Vec<f64>> {
        let chain = self.fixed_point_chain(1, n_max + 2, true)?;
        Ok(chain.windows(2).map(|w| (w[0] - w[1]).norm()).collect())
    }

    /// Up to `count` points of the upper half `φ(C_n^+)` of the `n`-th
    /// cylinder, i.e. of the arc `(2^{-(n+2)}, 2^{-(n+1)}]` turns. Cylinders
    /// finer than the table are reached by pulling back a coarser one.
    pub fn cylinder_samples(&self, n: u32, count: usize) -> Result<Vec<C64>> {
        if self.level < 3 {
            return Err(Error::LevelExceeded {
                requested: 3,
                available: self.level,
            });
        }
        let base = n.min(self.level - 3);
        let m = self.len();
        let lo = (m >> (base + 2)) + 1;
        let hi = m >> (base + 1);
        let step = ((hi - lo + 1) / count.max(1)).max(1);
        let f = self.map();
        (lo..=hi)
            .step_by(step)
            .take(count.max(1))
            .map(|i| {
                let mut z = self.points[i];
                for _ in base..n {
                    z = f.inverse_fixing_branch(z)?;
                }
                Ok(z)
            })
            .collect()
    }

    /// Restrict to a coarser level.
    pub fn coarsen(&self, level: u32) -> Result<BoettcherTable> {
        if level > self.level {
            return Err(Error::LevelExceeded {
                requested: level,
                available: self.level,
            });
        }
        let stride = 1usize << (self.level - level);
        let points: Vec<C64> = self.points.iter().step_by(stride).copied().collect();
        let residual = semiconjugacy_residual(self.map(), &points);
        Ok(BoettcherTable {
            delta: self.delta,
            level,
            tol: self.tol,
            residual,
            points,
        })
    }

    /// True when the arguments of the points about their centroid increase
    /// monotonically (mod 2π) in angle order, with total winding one turn.
    pub fn circular_order_ok(&self) -> bool {
        let n = self.points.len() as f64;
        let c: C64 = self.points.iter().sum::<C64>() / n;
        let mut total = 0.0;
        let m = self.points.len();
        for k in 0..m {
            let a = self.points[k] - c;
            let b = self.points[(k + 1) % m] - c;
            let step = (b / a).arg();
            if step <= 0.0 {
                return false;
            }
            total += step;
        }
        (total - 2.0 * std::f64::consts::PI).abs() < 1e-6
    }

    pub fn points_distinct(&self) -> bool {
        let m = self.points.len();
        (0..m).all(|k| self.points[k] != self.points[(k + 1) % m])
    }

    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "delta_re,delta_im,level,tol,residual")?;
        writeln!(
            w,
            "{:.16e},{:.16e},{},{:.16e},{:.16e}",
            self.delta.re, self.delta.im, self.level, self.tol, self.residual
        )?;
        for (k, p) in self.points.iter().enumerate() {
            writeln!(w, "{},{:.16e},{:.16e}", k, p.re, p.im)?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(r: R) -> Result<BoettcherTable> {
        let bad = |msg: &str| Error::Cache(msg.to_string());
        let mut lines = r.lines();
        let mut next = || -> Result<String> {
            lines
                .next()
                .ok_or_else(|| bad("unexpected end of file"))?
                .map_err(|e| Error::Cache(e.to_string()))
        };
        if next()?.trim() != "delta_re,delta_im,level,tol,residual" {
            return Err(bad("missing header"));
        }
        let head = next()?;
        let f: Vec<&str> = head.trim().split(',').collect();
        if f.len() != 5 {
            return Err(bad("malformed header values"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad("bad number"));
        let delta = C64::new(num(f[0])?, num(f[1])?);
        let level: u32 = f[2].parse().map_err(|_| bad("bad level"))?;
        if level > MAX_LEVEL {
            return Err(bad("level too large"));
        }
        let tol = num(f[3])?;
        let residual = num(f[4])?;
        let m = 1usize << level;
        let mut points = Vec::with_capacity(m);
        for k in 0..m {
            let line = next()?;
            let f: Vec<&str> = line.trim().split(',').collect();
            if f.len() != 3 || f[0].parse::<usize>().ok() != Some(k) {
                return Err(bad("malformed point row"));
            }
            points.push(C64::new(num(f[1])?, num(f[2])?));
        }
        Ok(BoettcherTable {
            delta,
            level,
            tol,
            residual,
            points,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::Cache(e.to_string()))?;
        let mut w = BufWriter::new(file);
        self.write(&mut w).map_err(|e| Error::Cache(e.to_string()))?;
        w.flush().map_err(|e| Error::Cache(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<BoettcherTable> {
        let file = fs::File::open(path).map_err(|e| Error::Cache(e.to_string()))?;
        BoettcherTable::read(BufReader::new(file))
    }
}

/// On-disk table store keyed by rounded parameter and level.
#[derive(Debug, Clone)]
pub struct TableCache {
    dir: PathBuf,
}

impl TableCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::Cache(e.to_string()))?;
        Ok(TableCache { dir })
    }

    pub fn path_for(&self, delta: C64, level: u32) -> PathBuf {
        let r = |x: f64| {
            let v = (x * 1e15).round() as i128;
            if v == 0 {
                0
            } else {
                v
            }
        };
        self.dir
            .join(format!("table_{}_{}_{}.csv", r(delta.re), r(delta.im), level))
    }

    pub fn get_or_build(&self, delta: C64, level: u32, tol: f64) -> Result<BoettcherTable> {
        let path = self.path_for(delta, level);
        if path.exists() {
            if let Ok(t) = BoettcherTable::load(&path) {
                if t.level == level && t.tol <= tol {
                    return Ok(t);
                }
            }
        }
        let t = build_table(delta, level, tol)?;
        t.save(&path)?;
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn dyadic_angle_reduction() {
        let a = DyadicAngle::new(4, 4).unwrap();
        assert_eq!((a.numerator(), a.level()), (1, 2));
        let z = DyadicAngle::new(16, 4).unwrap();
        assert_eq!(z, DyadicAngle::zero());
        assert_eq!(DyadicAngle::s(0).turns(), 0.5);
        assert_eq!(DyadicAngle::s(3).doubled(), DyadicAngle::s(2));
        assert_eq!(DyadicAngle::s(2).index_at(5).unwrap(), 4);
        assert!(DyadicAngle::s(5).index_at(3).is_err());
    }

    #[test]
    fn circle_case_level3() {
        let t = build_table(c(1.0, 0.0), 3, 1e-14).unwrap();
        for k in 0..8 {
            let expect = C64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / 8.0) - 1.0;
            assert!((t.points[k] - expect).norm() < 1e-14, "k={k}");
        }
    }

    #[test]
    fn circle_case_level12() {
        let t = build_table(c(1.0, 0.0), 12, 1e-13).unwrap();
        assert_eq!(t.points[0], c(0.0, 0.0));
        for (k, p) in t.points.iter().enumerate() {
            let expect = C64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / 4096.0) - 1.0;
            assert!((p - expect).norm() < 1e-12);
        }
        assert!((t.landing_point(DyadicAngle::s(0)).unwrap() - c(-2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn half_parameter_residual() {
        let t = build_table(c(0.5, 0.0), 10, 1e-13).unwrap();
        assert!(t.residual < 1e-9);
        assert!(t.circular_order_ok());
        assert!(t.points_distinct());
    }

    #[test]
    fn outside_disk_rejected() {
        assert_eq!(
            build_table(c(-0.5, 0.0), 6, 1e-12).unwrap_err().category(),
            "OUTSIDE_MAIN_DISK"
        );
    }

    #[test]
    fn landing_chain() {
        let t = build_table(C64::from_polar(0.3, 0.5), 12, 1e-13).unwrap();
        let f = t.map();
        for n in 0..10 {
            let a = t.z(n).unwrap();
            let b = t.z(n + 1).unwrap();
            assert!((f.eval(b) - a).norm() < 1e-12);
        }
        assert_eq!(t.landing_point(DyadicAngle::zero()).unwrap(), c(0.0, 0.0));
        assert!(t.landing_point(DyadicAngle::new(1, 13).unwrap()).is_err());
    }

    #[test]
    fn cylinder_sizes_positive() {
        let t = build_table(C64::from_polar(0.2, 0.3), 14, 1e-13).unwrap();
        let cyl = t.cylinders(12).unwrap();
        assert_eq!(cyl.len(), 13);
        for cy in &cyl {
            assert!(cy.size > 0.0);
            assert_eq!(cy.size, (cy.endpoints.0 - cy.endpoints.1).norm());
        }
        assert!(t.cylinders(13).is_err());
    }

    #[test]
    fn real_parameter_symmetry() {
        let t = build_table(c(0.3, 0.0), 10, 1e-13).unwrap();
        let m = t.len();
        for k in 0..m {
            assert!((t.points[k].conj() - t.points[(m - k) % m]).norm() < 1e-12);
        }
    }

    #[test]
    fn continuation_matches_fresh_build() {
        let d = c(0.4, 0.1);
        let t = build_table(d, 12, 1e-13).unwrap();
        let d2 = d + c(1e-4, 0.0);
        let a = build_table(d2, 12, 1e-13).unwrap();
        let b = build_table_from(&t, d2, 1e-13).unwrap();
        for k in 0..t.len() {
            assert!((a.points[k] - b.points[k]).norm() < 1e-12);
        }
    }

    #[test]
    fn continuity_in_parameter() {
        let d = C64::from_polar(0.3, std::f64::consts::FRAC_PI_6);
        let v = d / d.norm();
        let t = build_table(d, 10, 1e-13).unwrap();
        let mut prev = f64::INFINITY;
        for j in 1..6 {
            let h = 0.05 / f64::from(1u32 << j);
            let u = build_table(d + h * v, 10, 1e-13).unwrap();
            let gap = (0..t.len())
                .map(|k| (t.points[k] - u.points[k]).norm())
                .fold(0.0, f64::max);
            assert!(gap < prev);
            prev = gap;
        }
    }

    #[test]
    fn chain_extends_table() {
        let d = C64::from_polar(0.2, 0.4);
        let big = build_table(d, 14, 1e-13).unwrap();
        let small = big.coarsen(10).unwrap();
        for upper in [true, false] {
            let a = small.fixed_point_chain(3, 14, upper).unwrap();
            let b = big.fixed_point_chain(3, 14, upper).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn coarsen_is_subsample() {
        let t = build_table(c(0.6, 0.2), 10, 1e-13).unwrap();
        let s = t.coarsen(6).unwrap();
        let u = build_table(c(0.6, 0.2), 6, 1e-13).unwrap();
        for k in 0..64 {
            assert!((s.points[k] - u.points[k]).norm() < 1e-13);
        }
    }

    #[test]
    fn cache_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let cache = TableCache::new(dir.path()).unwrap();
        let d = c(0.25, -0.1);
        let t = cache.get_or_build(d, 8, 1e-13).unwrap();
        assert!(cache.path_for(d, 8).exists());
        let u = BoettcherTable::load(&cache.path_for(d, 8)).unwrap();
        assert_eq!(t, u);
        let again = cache.get_or_build(d, 8, 1e-13).unwrap();
        assert_eq!(t, again);
    }

    #[test]
    fn cache_rejects_garbage() {
        let r = BoettcherTable::read("nonsense\n".as_bytes());
        assert_eq!(r.unwrap_err().category(), "CACHE");
    }
}
