//! Subcommand definitions and their execution.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hdim_core::boettcher::build_table;
use hdim_core::quadrature::{find_theta0, omega, QuadratureSpec};
use hdim_core::transfer::hausdorff_dim;
use hdim_core::verify::{run_all, run_suite, Suite, VerifyOptions};
use hdim_core::C64;
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::config::{parse_from_str, Config};
use crate::error::CliError;
use crate::experiments::{self as ex, Grid, Parametrization, RayScanConfig};
use crate::output::{Cell, Manifest, Table};
use crate::parse::{parse_complex, parse_real, parse_real_list};

#[derive(Debug, Parser)]
#[command(name = "hdim", version, about = "Hausdorff dimension of quadratic Julia sets near the parabolic parameter 1/4")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Dyadic partition level
    #[arg(long, global = true)]
    pub level: Option<u32>,
    /// Solver tolerance (Bowen root, or quadrature for omega/theta0)
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Directory for CSV outputs and the run manifest
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Flat key = value file, or a manifest to replay
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Print the result as JSON
    #[arg(long, global = true)]
    pub json: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Hausdorff dimension of the Julia set of f_δ(z) = (1+δ)z + z²
    Dim {
        /// δ as a, a+bi or r@θ
        #[arg(long, allow_hyphen_values = true, value_parser = parse_complex)]
        delta: Option<C64>,
    },
    /// Tabulate Ω(ϑ) for a given 𝒟(0)
    Omega {
        /// 𝒟(0) (default 1.08)
        #[arg(long, value_parser = parse_real)]
        d0: Option<f64>,
        /// First ϑ (default -3)
        #[arg(long, allow_hyphen_values = true, value_parser = parse_real)]
        from: Option<f64>,
        /// Last ϑ (default 3)
        #[arg(long, allow_hyphen_values = true, value_parser = parse_real)]
        to: Option<f64>,
        /// ϑ spacing (default 0.05)
        #[arg(long, value_parser = parse_real)]
        step: Option<f64>,
    },
    /// Positive zero of Ω
    Theta0 {
        /// 𝒟(0) (default 1.08)
        #[arg(long, value_parser = parse_real)]
        d0: Option<f64>,
        /// Uncertainty of d0, propagated by re-solving at d0 ± err
        #[arg(long, value_parser = parse_real)]
        d0_err: Option<f64>,
    },
    /// Derivative of the dimension along a ray δ = t e^{iα}
    Ray {
        /// Ray angle, e.g. 0, pi/6 (default 0)
        #[arg(long, allow_hyphen_values = true, value_parser = parse_real)]
        alpha: Option<f64>,
        /// Largest t (default 0.4)
        #[arg(long, value_parser = parse_real)]
        t_start: Option<f64>,
        /// Smallest t (default 0.05)
        #[arg(long, value_parser = parse_real)]
        t_end: Option<f64>,
        /// Number of geometric grid points (default: ratio 1/√2)
        #[arg(long)]
        points: Option<usize>,
        /// 𝒟(0) used in the scaling (default: estimated)
        #[arg(long, value_parser = parse_real)]
        d0: Option<f64>,
        /// Finite-difference step relative to t; 0 disables the check
        #[arg(long, value_parser = parse_real)]
        fd_step: Option<f64>,
        /// Smallest t values used to fit the constant
        #[arg(long)]
        fit_points: Option<usize>,
        /// Also fit the scaling exponent of d'(ε) in the p_ε family
        #[arg(long)]
        hz: bool,
    },
    /// Extrapolate 𝒟(0) along the real ray
    D0 {
        /// Decreasing t values, comma separated
        #[arg(long, value_parser = parse_real_list)]
        t_values: Option<Vec<f64>>,
    },
    /// Run the property suites
    Verify {
        #[arg(long, value_enum)]
        suite: Option<SuiteArg>,
        /// Seed for the randomized checks
        #[arg(long)]
        seed: Option<u64>,
        /// Random samples per check
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Second differences of d(ε) = 𝒟 in the p_ε family, ε < 0
    Convexity {
        /// Most negative ε (default -0.05)
        #[arg(long, allow_hyphen_values = true, value_parser = parse_real)]
        eps_start: Option<f64>,
        /// Least negative ε (default -0.01)
        #[arg(long, allow_hyphen_values = true, value_parser = parse_real)]
        eps_end: Option<f64>,
        /// Spacing of the sampled ε
        #[arg(long, value_parser = parse_real)]
        spacing: Option<f64>,
        /// Difference step
        #[arg(long, value_parser = parse_real)]
        step: Option<f64>,
    },
    /// Membership grid for the δ-plane and ε-plane Mandelbrot sets
    Mandelbrot {
        /// Which parameter plane (default both)
        #[arg(long, value_enum)]
        family: Option<FamilyArg>,
        /// Grid bounds (defaults depend on the family)
        #[arg(long, allow_hyphen_values = true, value_parser = parse_real)]
        re_min: Option<f64>,
        #[arg(long, allow_hyphen_values = true, value_parser = parse_real)]
        re_max: Option<f64>,
        #[arg(long, allow_hyphen_values = true, value_parser = parse_real)]
        im_min: Option<f64>,
        #[arg(long, allow_hyphen_values = true, value_parser = parse_real)]
        im_max: Option<f64>,
        /// Grid columns (default 201)
        #[arg(long)]
        nx: Option<usize>,
        /// Grid rows (default 201)
        #[arg(long)]
        ny: Option<usize>,
        /// Iteration cap (default 1000)
        #[arg(long)]
        max_iter: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SuiteArg {
    Appendix,
    Fatou,
    Cylinders,
    Transfer,
    Perturbation,
    Quadrature,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Delta,
    Epsilon,
    Both,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Dim { .. } => "dim",
            Command::Omega { .. } => "omega",
            Command::Theta0 { .. } => "theta0",
            Command::Ray { .. } => "ray",
            Command::D0 { .. } => "d0",
            Command::Verify { .. } => "verify",
            Command::Convexity { .. } => "convexity",
            Command::Mandelbrot { .. } => "mandelbrot",
        }
    }
}

/// Everything a command produced.
#[derive(Debug)]
pub struct Report {
    pub manifest: Manifest,
    pub tables: Vec<Table>,
    pub result: Value,
    pub text: String,
    /// Set when a verification step failed; outputs are still written.
    pub failure: Option<String>,
    pub warnings: Vec<String>,
}

/// Collects resolved parameters for the manifest.
struct Params<'a> {
    config: &'a Config,
    map: Map<String, Value>,
}

impl<'a> Params<'a> {
    fn new(config: &'a Config) -> Self {
        Params { config, map: Map::new() }
    }

    fn record(&mut self, key: &str, v: String) {
        self.map.insert(key.to_string(), Value::String(v));
    }

    fn real(&mut self, key: &str, cli: Option<f64>, default: f64) -> Result<f64, CliError> {
        let v = self.config.resolve(key, cli, parse_real, default)?;
        self.record(key, v.to_string());
        Ok(v)
    }

    fn real_opt(&mut self, key: &str, cli: Option<f64>) -> Result<Option<f64>, CliError> {
        let v = self.config.resolve_opt(key, cli, parse_real)?;
        if let Some(x) = v {
            self.record(key, x.to_string());
        }
        Ok(v)
    }

    fn int<T>(&mut self, key: &str, cli: Option<T>, default: T) -> Result<T, CliError>
    where
        T: std::str::FromStr + std::fmt::Display,
        T::Err: std::fmt::Display,
    {
        let v = self.config.resolve(key, cli, parse_from_str::<T>, default)?;
        self.record(key, v.to_string());
        Ok(v)
    }

    fn flag(&mut self, key: &str, cli: bool) -> Result<bool, CliError> {
        let v = self.config.resolve(key, cli.then_some(true), parse_from_str::<bool>, false)?;
        self.record(key, v.to_string());
        Ok(v)
    }
}

pub fn execute(cli: &Cli, config: &Config) -> Result<Report, CliError> {
    let name = cli.command.name();
    if let Some(c) = &config.command {
        if c != name {
            return Err(CliError::Parse(format!("manifest was written by '{c}', not '{name}'")));
        }
    }
    let start = Instant::now();
    let mut p = Params::new(config);
    let mut out = match &cli.command {
        Command::Dim { delta } => cmd_dim(&mut p, &cli.common, *delta),
        Command::Omega { d0, from, to, step } => cmd_omega(&mut p, &cli.common, *d0, *from, *to, *step),
        Command::Theta0 { d0, d0_err } => cmd_theta0(&mut p, &cli.common, *d0, *d0_err),
        Command::Ray {
            alpha,
            t_start,
            t_end,
            points,
            d0,
            fd_step,
            fit_points,
            hz,
        } => cmd_ray(
            &mut p,
            &cli.common,
            RayArgs {
                alpha: *alpha,
                t_start: *t_start,
                t_end: *t_end,
                points: *points,
                d0: *d0,
                fd_step: *fd_step,
                fit_points: *fit_points,
                hz: *hz,
            },
        ),
        Command::D0 { t_values } => cmd_d0(&mut p, &cli.common, t_values.clone()),
        Command::Verify { suite, seed, samples } => cmd_verify(&mut p, *suite, *seed, *samples),
        Command::Convexity {
            eps_start,
            eps_end,
            spacing,
            step,
        } => cmd_convexity(&mut p, &cli.common, *eps_start, *eps_end, *spacing, *step),
        Command::Mandelbrot {
            family,
            re_min,
            re_max,
            im_min,
            im_max,
            nx,
            ny,
            max_iter,
        } => cmd_mandelbrot(
            &mut p,
            *family,
            [*re_min, *re_max, *im_min, *im_max],
            (*nx, *ny),
            *max_iter,
        ),
    }?;
    out.manifest = Manifest {
        command: name.to_string(),
        params: p.map,
        outputs: Vec::new(),
        duration_ms: start.elapsed().as_millis(),
        version: env!("CARGO_PKG_VERSION").to_string(),
    };
    Ok(out)
}

fn report(tables: Vec<Table>, result: Value, text: String) -> Report {
    Report {
        manifest: Manifest {
            command: String::new(),
            params: Map::new(),
            outputs: Vec::new(),
            duration_ms: 0,
            version: String::new(),
        },
        tables,
        result,
        text,
        failure: None,
        warnings: Vec::new(),
    }
}

fn quad_spec(p: &mut Params, common: &Common) -> Result<QuadratureSpec, CliError> {
    let mut spec = QuadratureSpec::default();
    if let Some(tol) = p.real_opt("tol", common.tol)? {
        spec.abs_tol = tol;
        spec.rel_tol = tol;
    }
    spec.validate()?;
    Ok(spec)
}

fn cmd_dim(p: &mut Params, common: &Common, delta: Option<C64>) -> Result<Report, CliError> {
    let delta = p
        .config
        .resolve_opt("delta", delta, parse_complex)?
        .ok_or_else(|| CliError::Parse("dim needs --delta".into()))?;
    p.record("delta", format!("{}{:+}i", delta.re, delta.im));
    let level = p.int("level", common.level, 16u32)?;
    let tol = p.real("tol", common.tol, 1e-10)?;
    let table = build_table(delta, level, ex::TABLE_TOL)?;
    let r = hausdorff_dim(&table, level, tol)?;
    let mut t = Table::new(
        "dim",
        &["delta_re", "delta_im", "level", "dimension", "extrapolated", "error_bound", "pressure_residual"],
    );
    t.push(vec![
        delta.re.into(),
        delta.im.into(),
        level.into(),
        r.tau0.into(),
        r.richardson_estimate.into(),
        r.error_bound.into(),
        r.pressure_residual.into(),
    ]);
    let text = format!(
        "dimension {:.6} (level {level}, extrapolated {:.6}, level change {:.1e})",
        r.tau0, r.richardson_estimate, r.error_bound
    );
    Ok(report(vec![t], serde_json::to_value(r)?, text))
}

fn cmd_omega(
    p: &mut Params,
    common: &Common,
    d0: Option<f64>,
    from: Option<f64>,
    to: Option<f64>,
    step: Option<f64>,
) -> Result<Report, CliError> {
    let d0 = p.real("d0", d0, 1.08)?;
    let from = p.real("from", from, -3.0)?;
    let to = p.real("to", to, 3.0)?;
    let step = p.real("step", step, 0.05)?;
    let spec = quad_spec(p, common)?;
    if !(step > 0.0 && to >= from) {
        return Err(CliError::Parse("omega needs step > 0 and to >= from".into()));
    }
    if !(d0 > 1.0 && d0 < 1.5) {
        return Err(hdim_core::Error::InvalidDimension(d0).into());
    }
    let n = ((to - from) / step + 1e-9).floor() as usize + 1;
    let rows: Vec<(f64, Result<_, hdim_core::Error>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let theta = from + step * i as f64;
            (theta, omega(theta, d0, &spec))
        })
        .collect();
    let mut t = Table::new("omega", &["theta", "omega", "err"]);
    let mut skipped = Vec::new();
    for (theta, r) in rows {
        match r {
            Ok(r) => t.push(vec![theta.into(), r.value.into(), r.err_estimate.into()]),
            Err(e) => skipped.push(json!({"theta": theta, "error": e.category()})),
        }
    }
    let text = format!("{} rows, {} skipped", t.rows.len(), skipped.len());
    let mut rep = report(vec![t], json!({"rows": n - skipped.len(), "skipped": skipped}), text);
    if !skipped.is_empty() {
        rep.warnings.push(format!("{} rows skipped after quadrature failures", skipped.len()));
    }
    Ok(rep)
}

fn cmd_theta0(p: &mut Params, common: &Common, d0: Option<f64>, d0_err: Option<f64>) -> Result<Report, CliError> {
    let d0 = p.real("d0", d0, 1.08)?;
    let err = p.real("d0-err", d0_err, 0.0)?;
    let spec = quad_spec(p, common)?;
    let bracket = (0.5, 3.0);
    let centre = find_theta0(d0, bracket, &spec)?;
    let (lo, hi) = if err > 0.0 {
        let (a, b) = rayon::join(|| find_theta0(d0 - err, bracket, &spec), || find_theta0(d0 + err, bracket, &spec));
        (a?, b?)
    } else {
        (centre, centre)
    };
    let uncertainty = (lo - centre).abs().max((hi - centre).abs());
    let mut t = Table::new("theta0", &["d0", "d0_err", "theta0", "uncertainty"]);
    t.push(vec![d0.into(), err.into(), centre.into(), uncertainty.into()]);
    let text = format!("theta0 = {centre:.6} ± {uncertainty:.1e}");
    Ok(report(
        vec![t],
        json!({"theta0": centre, "uncertainty": uncertainty, "at_d0_minus": lo, "at_d0_plus": hi}),
        text,
    ))
}

struct RayArgs {
    alpha: Option<f64>,
    t_start: Option<f64>,
    t_end: Option<f64>,
    points: Option<usize>,
    d0: Option<f64>,
    fd_step: Option<f64>,
    fit_points: Option<usize>,
    hz: bool,
}

/// Default `t` sequence for the real-ray extrapolation of `𝒟(0)`.
pub const D0_T_VALUES: [f64; 3] = [0.2, 0.1, 0.05];

fn cmd_ray(p: &mut Params, common: &Common, a: RayArgs) -> Result<Report, CliError> {
    let alpha = p.real("alpha", a.alpha, 0.0)?;
    let t_start = p.real("t-start", a.t_start, 0.4)?;
    let t_end = p.real("t-end", a.t_end, 0.05)?;
    let points = p.config.resolve_opt("points", a.points, parse_from_str::<usize>)?;
    if let Some(n) = points {
        p.record("points", n.to_string());
    }
    let level = p.int("level", common.level, 14u32)?;
    let tol = p.real("tol", common.tol, 1e-10)?;
    let fd = p.real("fd-step", a.fd_step, 0.01)?;
    let fit_points = p.int("fit-points", a.fit_points, 2usize)?;
    let hz = p.flag("hz", a.hz)?;
    let mut warnings = Vec::new();
    let d0 = match p.config.resolve_opt("d0", a.d0, parse_real)? {
        Some(v) => v,
        None => {
            let est = ex::d0_estimate(16, &D0_T_VALUES, tol)?;
            if !est.within_bounds {
                warnings.push(out_of_bounds(est.value));
            }
            est.value
        }
    };
    p.record("d0", d0.to_string());
    let t_values = match points {
        Some(n) => ex::geometric_grid(t_start, t_end, n)?,
        None => ex::default_t_grid(t_start, t_end),
    };
    let scan = ex::ray_scan(RayScanConfig {
        alpha,
        t_values,
        level,
        tol,
        d0,
        fd_step: (fd > 0.0).then_some(fd),
        fit_points,
    })?;
    let mut rows = Table::new(
        "ray",
        &[
            "t", "delta_re", "delta_im", "dimension", "derivative", "derivative_fd", "ratio", "lyapunov", "d0", "status",
        ],
    );
    for (t, r) in scan.config.t_values.iter().zip(&scan.rows) {
        let delta = C64::from_polar(*t, alpha);
        match r {
            Ok(r) => rows.push(vec![
                r.t.into(),
                delta.re.into(),
                delta.im.into(),
                r.dimension.into(),
                r.derivative.into(),
                r.derivative_fd.unwrap_or(f64::NAN).into(),
                r.ratio.into(),
                r.lyapunov.into(),
                d0.into(),
                "ok".into(),
            ]),
            Err(e) => {
                let mut row: Vec<Cell> = vec![(*t).into(), delta.re.into(), delta.im.into()];
                row.extend((0..5).map(|_| Cell::Real(f64::NAN)));
                row.push(d0.into());
                row.push(e.as_str().into());
                rows.push(row);
                warnings.push(format!("t={t}: {e}"));
            }
        }
    }
    let mut consts = Table::new("ray_constants", &["name", "value"]);
    for (k, v) in [
        ("omega", scan.omega),
        ("fitted_a", scan.fitted_a),
        ("lyapunov", scan.ok_rows().last().map_or(f64::NAN, |r| r.lyapunov)),
        ("implied_h_mu", scan.implied_h_mu),
        ("big_a", scan.big_a),
        ("big_a_from_h_mu", scan.big_a_check),
        ("stability_doubling", scan.stability_doubling),
        ("stability_consecutive", scan.stability_consecutive),
    ] {
        consts.push(vec![k.into(), v.into()]);
    }
    let mut text = format!(
        "fitted A = {:.6}, H_mu = {:.6}, r(t_min)/r(2 t_min) - 1 = {:+.4}",
        scan.fitted_a, scan.implied_h_mu, scan.stability_doubling
    );
    let mut result = json!({
        "d0": d0,
        "omega": scan.omega,
        "fitted_a": scan.fitted_a,
        "implied_h_mu": scan.implied_h_mu,
        "big_a": scan.big_a,
        "big_a_from_h_mu": scan.big_a_check,
        "stability_doubling": scan.stability_doubling,
        "stability_consecutive": scan.stability_consecutive,
        "stabilization_tolerance": 0.2,
    });
    let mut tables = vec![rows, consts];
    if hz {
        let fit = ex::hz_slope(-0.1, -0.02, 6, level, tol, d0)?;
        let mut t = Table::new("hz", &["epsilon", "dimension", "derivative"]);
        for r in &fit.rows {
            t.push(vec![r.epsilon.into(), r.dimension.into(), r.derivative.into()]);
        }
        tables.push(t);
        text += &format!("; slope of log|d'(eps)| = {:.4} (d0 - 3/2 = {:.4})", fit.slope, fit.target);
        result["hz_slope"] = json!(fit.slope);
        result["hz_target"] = json!(fit.target);
    }
    let mut rep = report(tables, result, text);
    rep.warnings = warnings;
    Ok(rep)
}

fn out_of_bounds(v: f64) -> String {
    format!(
        "OUT_OF_KNOWN_BOUNDS: estimate {v} outside ({}, {})",
        ex::D0_BOUNDS.0,
        ex::D0_BOUNDS.1
    )
}

fn cmd_d0(p: &mut Params, common: &Common, t_values: Option<Vec<f64>>) -> Result<Report, CliError> {
    let level = p.int("level", common.level, 16u32)?;
    let tol = p.real("tol", common.tol, 1e-10)?;
    let t_values = p.config.resolve("t-values", t_values, parse_real_list, D0_T_VALUES.to_vec())?;
    p.record(
        "t-values",
        t_values.iter().map(f64::to_string).collect::<Vec<_>>().join(","),
    );
    let est = ex::d0_estimate(level, &t_values, tol)?;
    let mut t = Table::new("d0", &["t", "dimension"]);
    for (x, d) in est.t_values.iter().zip(&est.dimensions) {
        t.push(vec![(*x).into(), (*d).into()]);
    }
    let text = format!(
        "d0 = {:.6} (halving change {:.1e}, level-2 change {:+.1e}, exponent {:.4})",
        est.value, est.stability, est.level_sensitivity, est.exponent
    );
    let mut rep = report(vec![t], serde_json::to_value(&est)?, text);
    if !est.within_bounds {
        rep.warnings.push(out_of_bounds(est.value));
    }
    Ok(rep)
}

fn cmd_verify(p: &mut Params, suite: Option<SuiteArg>, seed: Option<u64>, samples: Option<usize>) -> Result<Report, CliError> {
    let suite = p.config.resolve("suite", suite, parse_suite, SuiteArg::All)?;
    p.record("suite", suite.to_possible_value().map_or("all".into(), |v| v.get_name().to_string()));
    let defaults = VerifyOptions::default();
    let opts = VerifyOptions {
        seed: p.int("seed", seed, defaults.seed)?,
        samples: p.int("samples", samples, defaults.samples)?,
    };
    let checks = match suite_of(suite) {
        Some(s) => run_suite(s, &opts),
        None => run_all(&opts),
    };
    let mut t = Table::new("verify", &["suite", "check", "passed", "detail"]);
    let mut text = String::new();
    for c in &checks {
        t.push(vec![c.suite.name().into(), c.name.as_str().into(), c.passed.into(), c.detail.as_str().into()]);
        text += &format!("[{}] {} / {}: {}\n", if c.passed { "PASS" } else { "FAIL" }, c.suite, c.name, c.detail);
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    text += &format!("{} checks, {failed} failed", checks.len());
    let mut rep = report(vec![t], serde_json::to_value(&checks)?, text);
    if failed > 0 {
        rep.failure = Some(format!("{failed} of {} checks failed", checks.len()));
    }
    Ok(rep)
}

fn parse_suite(s: &str) -> Result<SuiteArg, String> {
    SuiteArg::from_str(s.trim(), true)
}

fn suite_of(s: SuiteArg) -> Option<Suite> {
    Some(match s {
        SuiteArg::Appendix => Suite::Appendix,
        SuiteArg::Fatou => Suite::Fatou,
        SuiteArg::Cylinders => Suite::Cylinders,
        SuiteArg::Transfer => Suite::Transfer,
        SuiteArg::Perturbation => Suite::Perturbation,
        SuiteArg::Quadrature => Suite::Quadrature,
        SuiteArg::All => return None,
    })
}

fn cmd_convexity(
    p: &mut Params,
    common: &Common,
    eps_start: Option<f64>,
    eps_end: Option<f64>,
    spacing: Option<f64>,
    step: Option<f64>,
) -> Result<Report, CliError> {
    let a = p.real("eps-start", eps_start, -0.05)?;
    let b = p.real("eps-end", eps_end, -0.01)?;
    let spacing = p.real("spacing", spacing, 0.005)?;
    let h = p.real("step", step, 0.005)?;
    let level = p.int("level", common.level, 14u32)?;
    let tol = p.real("tol", common.tol, 1e-11)?;
    if !(spacing > 0.0 && a <= b && b < 0.0) {
        return Err(CliError::Parse("convexity needs eps-start <= eps-end < 0 and spacing > 0".into()));
    }
    let n = ((b - a) / spacing + 1e-9).floor() as usize + 1;
    let eps: Vec<f64> = (0..n).map(|i| a + spacing * i as f64).collect();
    let c = ex::convexity_probe(&eps, h, level, tol)?;
    let mut t = Table::new(
        "convexity",
        &["epsilon", "dimension", "second_difference", "second_difference_half_step", "halving_change", "noisy"],
    );
    for r in &c.rows {
        t.push(vec![
            r.epsilon.into(),
            r.dimension.into(),
            r.second_difference.into(),
            r.second_difference_half.into(),
            r.halving_change.into(),
            r.noisy.into(),
        ]);
    }
    let worst = c.rows.iter().map(|r| r.halving_change).fold(0.0, f64::max);
    let text = format!(
        "{} points, all second differences positive: {}, largest step-halving change {:.1}%",
        c.rows.len(),
        c.all_positive,
        100.0 * worst
    );
    let mut rep = report(vec![t], serde_json::to_value(&c)?, text);
    if !c.all_positive {
        rep.failure = Some("a second difference is not positive".into());
    }
    if c.rows.iter().any(|r| r.noisy) {
        rep.warnings.push("some second differences are near the solver tolerance".into());
    }
    Ok(rep)
}

fn cmd_mandelbrot(
    p: &mut Params,
    family: Option<FamilyArg>,
    ranges: [Option<f64>; 4],
    (nx, ny): (Option<usize>, Option<usize>),
    max_iter: Option<usize>,
) -> Result<Report, CliError> {
    let family = p.config.resolve("family", family, |s| FamilyArg::from_str(s.trim(), true), FamilyArg::Both)?;
    p.record("family", family.to_possible_value().map_or("both".into(), |v| v.get_name().to_string()));
    let nx = p.int("nx", nx, 201usize)?;
    let ny = p.int("ny", ny, 201usize)?;
    let max_iter = p.int("max-iter", max_iter, 1000usize)?;
    let keys = ["re-min", "re-max", "im-min", "im-max"];
    let mut given = [None; 4];
    for (i, k) in keys.iter().enumerate() {
        given[i] = p.real_opt(k, ranges[i])?;
    }
    let grid_for = |fam: Parametrization| {
        let d = match fam {
            Parametrization::Delta => [-1.0, 3.0, -2.0, 2.0],
            Parametrization::Epsilon => [-2.25, 0.5, -1.25, 1.25],
        };
        let v: Vec<f64> = (0..4).map(|i| given[i].unwrap_or(d[i])).collect();
        Grid { re: (v[0], v[1]), im: (v[2], v[3]), nx, ny }
    };
    let fams = match family {
        FamilyArg::Delta => vec![Parametrization::Delta],
        FamilyArg::Epsilon => vec![Parametrization::Epsilon],
        FamilyArg::Both => vec![Parametrization::Delta, Parametrization::Epsilon],
    };
    let mut t = Table::new("mandelbrot", &["family", "re", "im", "inside"]);
    let mut counts = Map::new();
    for fam in fams {
        let cells = ex::mandelbrot_grid(fam, &grid_for(fam), max_iter)?;
        let label = match fam {
            Parametrization::Delta => "delta",
            Parametrization::Epsilon => "epsilon",
        };
        counts.insert(label.into(), json!(cells.iter().filter(|c| c.inside).count()));
        for c in cells {
            t.push(vec![label.into(), c.re.into(), c.im.into(), c.inside.into()]);
        }
    }
    let text = format!("{} grid points", t.rows.len());
    Ok(report(vec![t], json!({"inside": counts}), text))
}
