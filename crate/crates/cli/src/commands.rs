//! Subcommand implementations. Each writes data files into an output directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use splitstep::harness::{self, ErrorSeries, Reference, StrongConfig, WeakConfig, PATH_BITS};
use splitstep::integrator::{simulate_path, uniform_grid, BaselineMethod, Scheme};
use splitstep::models::{self, SplitModel};
use splitstep::spde::{self, LatticeField, SpdeKind, SpdeSpec, SupportShape, ThetaCriticalConfig};
use splitstep::{stream_id, NcChi2Params, RngStream};

use crate::config::RunConfig;
use crate::error::CliError;

/// Output directory plus the effective configuration echoed into it.
pub struct Output {
    dir: PathBuf,
}

impl Output {
    pub fn create(dir: &Path, cfg: &RunConfig) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let out = Self { dir: dir.to_path_buf() };
        // Results do not depend on the thread count, so the echo leaves it at its default.
        let echo = RunConfig {
            threads: 0,
            ..cfg.clone()
        };
        out.write("config.toml", &echo.to_toml())?;
        Ok(out)
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        fs::write(&path, contents).map_err(|e| CliError::io(&path, e))
    }

    pub fn write_json(&self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        let mut s = serde_json::to_string_pretty(value).expect("summary serializes");
        s.push('\n');
        self.write(name, &s)
    }
}

fn model(cfg: &RunConfig) -> Result<SplitModel, CliError> {
    Ok(models::by_name(&cfg.model.name, &cfg.model.params())?)
}

fn scheme(model: &SplitModel, name: &str) -> Result<Box<dyn Scheme>, CliError> {
    let method = match name {
        "split" => return Ok(Box::new(model.split_scheme())),
        "euler" | "euler-maruyama" => BaselineMethod::EulerMaruyama,
        "abs-sqrt-euler" => BaselineMethod::AbsSqrtEuler,
        "split-step-backward-euler" => BaselineMethod::SplitStepBackwardEuler,
        other => {
            return Err(CliError::Config(format!(
                "unknown scheme '{other}'; use split, euler-maruyama, abs-sqrt-euler or split-step-backward-euler"
            )))
        }
    };
    Ok(Box::new(model.baseline(method)))
}

fn check_x0(model: &SplitModel, x0: f64) -> Result<(), CliError> {
    if model.domain().contains(x0) {
        Ok(())
    } else {
        Err(CliError::Config(format!(
            "x0 = {x0} is outside the domain of model '{}'",
            model.name()
        )))
    }
}

fn check_positive(name: &str, v: usize) -> Result<(), CliError> {
    if v == 0 {
        Err(CliError::Config(format!("{name} must be at least 1")))
    } else {
        Ok(())
    }
}

#[derive(Serialize)]
struct SimulateSummary<'a> {
    model: &'a str,
    scheme: &'a str,
    boundary: String,
    paths: usize,
    steps: usize,
    min_value: f64,
    negative_values: usize,
    zero_values: usize,
    zero_terminal_fraction: f64,
    terminal_mean: f64,
    terminal_stderr: f64,
    exact_mean: Option<f64>,
}

pub fn simulate(cfg: &RunConfig, out: &Output) -> Result<(), CliError> {
    let s = &cfg.simulate;
    let model = model(cfg)?;
    let scheme = scheme(&model, &s.scheme)?;
    check_x0(&model, s.x0)?;
    check_positive("paths", s.paths)?;
    let grid = uniform_grid(s.t, s.dt)?;
    let paths: Vec<Vec<f64>> = (0..s.paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = RngStream::new(cfg.seed, stream_id(0, p as u64, PATH_BITS));
            simulate_path(&*scheme, s.x0, &grid, &mut rng)
        })
        .collect::<Result<_, _>>()?;

    let mut csv = String::from("t");
    for p in 0..paths.len() {
        write!(csv, ",x_{p}").unwrap();
    }
    csv.push('\n');
    for (i, t) in grid.iter().enumerate() {
        write!(csv, "{t}").unwrap();
        for path in &paths {
            write!(csv, ",{}", path[i]).unwrap();
        }
        csv.push('\n');
    }
    out.write("paths.csv", &csv)?;

    let all = paths.iter().flatten();
    let terminal: splitstep::stats::Moments = paths.iter().map(|p| p[p.len() - 1]).collect();
    out.write_json(
        "summary.json",
        &SimulateSummary {
            model: model.name(),
            scheme: scheme.name(),
            boundary: model.boundary().to_string(),
            paths: paths.len(),
            steps: grid.len() - 1,
            min_value: all.clone().fold(f64::INFINITY, |a, &b| a.min(b)),
            negative_values: all.clone().filter(|v| **v < 0.0).count(),
            zero_values: all.filter(|v| **v == 0.0).count(),
            zero_terminal_fraction: paths.iter().filter(|p| p[p.len() - 1] == 0.0).count() as f64 / paths.len() as f64,
            terminal_mean: terminal.mean(),
            terminal_stderr: terminal.std_error(),
            exact_mean: model.exact_mean(s.x0, s.t),
        },
    )
}

#[derive(Serialize)]
struct SeriesSummary {
    scheme: String,
    slope: Option<f64>,
    half_width: Option<f64>,
    fit_error: Option<String>,
}

#[derive(Serialize)]
struct ConvergeSummary<'a> {
    mode: &'a str,
    model: &'a str,
    series: Vec<SeriesSummary>,
}

fn write_series(out: &Output, mode: &str, model: &SplitModel, series: &[ErrorSeries]) -> Result<(), CliError> {
    let mut csv = String::from("scheme,dt,error,stderr\n");
    let mut summaries = Vec::new();
    for s in series {
        for ((dt, e), se) in s.dts.iter().zip(&s.errors).zip(&s.stderrs) {
            writeln!(csv, "{},{dt},{e},{se}", s.label).unwrap();
        }
        let fit = s.fit();
        summaries.push(SeriesSummary {
            scheme: s.label.clone(),
            slope: fit.as_ref().ok().map(|f| f.slope),
            half_width: fit.as_ref().ok().map(|f| f.half_width),
            fit_error: fit.err().map(|e| e.to_string()),
        });
    }
    out.write("converge.csv", &csv)?;
    out.write_json(
        "summary.json",
        &ConvergeSummary {
            mode,
            model: model.name(),
            series: summaries,
        },
    )
}

pub fn converge_weak(cfg: &RunConfig, out: &Output) -> Result<(), CliError> {
    let w = &cfg.weak;
    let model = model(cfg)?;
    check_x0(&model, w.x0)?;
    if model.stats().mean.is_none() {
        return Err(CliError::Config(format!(
            "model '{}' has no known conditional mean",
            model.name()
        )));
    }
    let schemes = w
        .schemes
        .iter()
        .map(|n| scheme(&model, n))
        .collect::<Result<Vec<_>, _>>()?;
    for &dt in &w.dts {
        splitstep::integrator::step_count(w.t, dt)?;
    }
    let wc = WeakConfig {
        x0: w.x0,
        t: w.t,
        dts: w.dts.clone(),
        paths: w.paths,
        seed: cfg.seed,
    };
    let series = w
        .schemes
        .iter()
        .zip(&schemes)
        .map(|(label, s)| harness::weak_series(&model, &**s, label, &wc))
        .collect::<Result<Vec<_>, _>>()?;
    write_series(out, "weak", &model, &series)
}

pub fn converge_strong(cfg: &RunConfig, out: &Output) -> Result<(), CliError> {
    let s = &cfg.strong;
    let model = model(cfg)?;
    check_x0(&model, s.x0)?;
    let schemes = s
        .schemes
        .iter()
        .map(|n| scheme(&model, n))
        .collect::<Result<Vec<_>, _>>()?;
    let fine_split = model.split_scheme();
    let reference = match s.reference.as_str() {
        "exact" => Reference::Exact,
        "fine-split" => Reference::FineScheme(&fine_split),
        other => {
            return Err(CliError::Config(format!(
                "unknown reference '{other}'; use exact or fine-split"
            )))
        }
    };
    let labelled: Vec<(&str, &dyn Scheme)> = s
        .schemes
        .iter()
        .zip(&schemes)
        .map(|(l, b)| (l.as_str(), &**b))
        .collect();
    let sc = StrongConfig {
        x0: s.x0,
        t: s.t,
        dts: s.dts.clone(),
        fine_dt: s.fine_dt,
        k: s.k,
        paths: s.paths,
        seed: cfg.seed,
    };
    let series = harness::strong_series(&model, &labelled, reference, &sc)?;
    write_series(out, "strong", &model, &series)
}

fn format_row(values: &[f64]) -> String {
    let mut s = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        write!(s, "{v}").unwrap();
    }
    s
}

fn snapshot(field: &LatticeField) -> String {
    let row = if field.dims() == 1 { field.sites() } else { field.len() };
    let mut s = String::new();
    for r in field.values().chunks(row) {
        s.push_str(&format_row(r));
        s.push('\n');
    }
    s
}

#[derive(Serialize)]
struct SbmSummary {
    dims: usize,
    len: usize,
    dx: f64,
    dt: f64,
    sigma: f64,
    boundary: &'static str,
    steps: usize,
    t_end: f64,
    extinct_at: Option<f64>,
    initial_mass: f64,
    final_mass: f64,
    max_extent: Option<usize>,
}

pub fn spde_sbm(cfg: &RunConfig, out: &Output) -> Result<(), CliError> {
    let s = &cfg.sbm;
    let sites = s
        .len
        .checked_pow(s.dims as u32)
        .ok_or_else(|| CliError::Config("lattice too large".into()))?;
    let u = match s.init.as_str() {
        "uniform" => vec![s.u0; sites],
        "block" => {
            if s.block_width == 0 || s.block_width > s.len {
                return Err(CliError::Config(format!("block_width must be in 1..={}", s.len)));
            }
            let lo = (s.len - s.block_width) / 2;
            let inside = |i: usize| i >= lo && i < lo + s.block_width;
            (0..sites)
                .map(|i| {
                    let hit = if s.dims == 1 {
                        inside(i)
                    } else {
                        inside(i / s.len) && inside(i % s.len)
                    };
                    if hit {
                        s.u0
                    } else {
                        0.0
                    }
                })
                .collect()
        }
        other => {
            return Err(CliError::Config(format!(
                "unknown init '{other}'; use uniform or block"
            )))
        }
    };
    let init = LatticeField::new(s.dims, s.len, s.dx, u)?;
    let spec = SpdeSpec {
        kind: SpdeKind::Sbm { sigma: s.sigma },
        dt: s.dt,
        t_max: s.t_max,
    };
    let n = spec.validate(&init)?;
    let initial_mass = init.total_mass();

    let mut support = String::from("t,min,max\n");
    let mut mass = String::from("t,mass\n");
    let mut snapshots: Vec<(usize, f64, String)> = Vec::new();
    let mut max_extent: Option<usize> = None;
    let outcome = spde::run_spde(&spec, init, cfg.seed, s.run, |state| {
        let f = &state.field;
        writeln!(mass, "{},{}", state.t, f.total_mass()).unwrap();
        if f.dims() == 1 {
            match f.support().shape {
                SupportShape::Arc(a) => {
                    let (lo, hi) = a.extremes();
                    max_extent = Some(max_extent.unwrap_or(0).max(a.length));
                    writeln!(support, "{},{lo},{hi}", state.t).unwrap();
                }
                _ => writeln!(support, "{},,", state.t).unwrap(),
            }
        }
        let due = s.snapshot_every > 0 && state.step % s.snapshot_every == 0;
        let wanted = due || state.step == 0 || state.step == n || f.is_empty();
        if wanted && snapshots.last().map(|l| l.0) != Some(state.step) {
            snapshots.push((state.step, state.t, snapshot(f)));
        }
    })?;

    for (step, t, body) in &snapshots {
        let stem = format!("snapshots/step_{step:08}");
        out.write(&format!("{stem}.txt"), body)?;
        let meta = format!(
            "kind=sbm\ndims={}\nlen={}\ndx={}\ndt={}\nsigma={}\nt={t}\nstep={step}\nseed={}\nrun={}\nboundary=periodic\n",
            s.dims, s.len, s.dx, s.dt, s.sigma, cfg.seed, s.run
        );
        out.write(&format!("{stem}.meta"), &meta)?;
    }
    if s.dims == 1 {
        out.write("support.csv", &support)?;
    }
    out.write("mass.csv", &mass)?;
    out.write_json(
        "summary.json",
        &SbmSummary {
            dims: s.dims,
            len: s.len,
            dx: s.dx,
            dt: s.dt,
            sigma: s.sigma,
            boundary: "periodic",
            steps: outcome.steps,
            t_end: outcome.t_end,
            extinct_at: outcome.extinct_at,
            initial_mass,
            final_mass: outcome.field.total_mass(),
            max_extent,
        },
    )
}

#[derive(Serialize)]
struct ContactSummary {
    dims: usize,
    len: usize,
    dt: f64,
    t_max: f64,
    runs: usize,
    monotone: bool,
    points: Vec<SweepJson>,
}

#[derive(Serialize)]
struct SweepJson {
    theta: f64,
    p: f64,
    se: f64,
}

pub fn spde_contact(cfg: &RunConfig, out: &Output) -> Result<(), CliError> {
    let c = &cfg.contact;
    check_positive("runs", c.runs)?;
    let init = LatticeField::uniform(c.dims, c.len, c.dx, c.rho0)?;
    for &theta in &c.thetas {
        SpdeSpec {
            kind: SpdeKind::Contact { theta },
            dt: c.dt,
            t_max: c.t_max,
        }
        .validate(&init)?;
    }
    let mut csv = String::from("theta,p,se,runs\n");
    let mut points = Vec::new();
    for &theta in &c.thetas {
        let spec = SpdeSpec {
            kind: SpdeKind::Contact { theta },
            dt: c.dt,
            t_max: c.t_max,
        };
        let est = spde::survival_probability(&spec, &init, c.runs, cfg.seed)?;
        writeln!(csv, "{theta},{},{},{}", est.p, est.se, est.runs).unwrap();
        points.push(spde::SweepPoint {
            theta,
            p: est.p,
            se: est.se,
        });
    }
    out.write("survival.csv", &csv)?;
    out.write_json(
        "summary.json",
        &ContactSummary {
            dims: c.dims,
            len: c.len,
            dt: c.dt,
            t_max: c.t_max,
            runs: c.runs,
            monotone: spde::is_monotone(&points),
            points: points
                .iter()
                .map(|p| SweepJson {
                    theta: p.theta,
                    p: p.p,
                    se: p.se,
                })
                .collect(),
        },
    )
}

#[derive(Serialize)]
struct ThetaSummary {
    theta_c: f64,
    se: f64,
    slope: f64,
    residuals: Vec<f64>,
    per_dt: Vec<CrossingJson>,
    monotone: bool,
    method: &'static str,
}

#[derive(Serialize)]
struct CrossingJson {
    dt: f64,
    theta_c: f64,
    se: f64,
}

pub const THETA_METHOD: &str = "bisection of the survival fraction at t_max for the 1/2 crossing at each dt, \
     then weighted linear extrapolation in dt to dt = 0";

pub fn theta_critical(cfg: &RunConfig, out: &Output) -> Result<(), CliError> {
    let c = &cfg.theta_critical;
    check_positive("runs", c.runs)?;
    let tc = ThetaCriticalConfig {
        dims: 1,
        len: c.len,
        dx: c.dx,
        rho0: c.rho0,
        t_max: c.t_max,
        runs: c.runs,
        seed: cfg.seed,
        bracket: (c.bracket[0], c.bracket[1]),
        tol: c.tol,
        dts: c.dts.clone(),
    };
    let init = LatticeField::uniform(1, c.len, c.dx, c.rho0)?;
    for &dt in &c.dts {
        SpdeSpec {
            kind: SpdeKind::Contact { theta: c.bracket[1] },
            dt,
            t_max: c.t_max,
        }
        .validate(&init)?;
    }
    let est = spde::estimate_theta_c(&tc)?;
    let mut crossings = String::from("dt,theta_c,se\n");
    let mut sweep = String::from("dt,theta,p,se\n");
    for p in &est.points {
        writeln!(crossings, "{},{},{}", p.dt, p.theta_c, p.se).unwrap();
        for s in &p.sweep {
            writeln!(sweep, "{},{},{},{}", p.dt, s.theta, s.p, s.se).unwrap();
        }
    }
    out.write("crossings.csv", &crossings)?;
    out.write("sweep.csv", &sweep)?;
    out.write_json(
        "summary.json",
        &ThetaSummary {
            theta_c: est.theta_c,
            se: est.se,
            slope: est.slope,
            residuals: est.residuals.clone(),
            per_dt: est
                .points
                .iter()
                .map(|p| CrossingJson {
                    dt: p.dt,
                    theta_c: p.theta_c,
                    se: p.se,
                })
                .collect(),
            monotone: est.points.iter().all(|p| spde::is_monotone(&p.sweep)),
            method: THETA_METHOD,
        },
    )
}

#[derive(Serialize)]
struct Ncx2Summary {
    d: f64,
    lambda: f64,
    count: usize,
    mean: f64,
    zero_fraction: f64,
    expected_mean: f64,
    expected_zero_mass: f64,
}

pub fn sample_ncx2(cfg: &RunConfig, out: &Output) -> Result<(), CliError> {
    let n = &cfg.ncx2;
    let p = NcChi2Params::new(n.d, n.lambda)?;
    let mut rng = RngStream::new(cfg.seed, 0);
    let xs: Vec<f64> = (0..n.count).map(|_| rng.ncx2(p)).collect();
    let mut csv = String::from("x\n");
    for x in &xs {
        writeln!(csv, "{x}").unwrap();
    }
    out.write("samples.csv", &csv)?;
    let count = xs.len().max(1) as f64;
    out.write_json(
        "summary.json",
        &Ncx2Summary {
            d: n.d,
            lambda: n.lambda,
            count: xs.len(),
            mean: xs.iter().sum::<f64>() / count,
            zero_fraction: xs.iter().filter(|x| **x == 0.0).count() as f64 / count,
            expected_mean: p.mean(),
            expected_zero_mass: p.atom_at_zero(),
        },
    )
}
