//! Lattice SPDEs with square-root noise: the super-random walk and the contact process.
//!
//! Each step samples `du_i = √(c·u_i) dW_i` exactly at every site, then applies an
//! explicit Euler step of the deterministic part on a periodic lattice. Every site
//! owns a persistent stream addressed by `(run, site)`, so fields are reproducible
//! independently of scheduling.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::integrator::step_count;
use crate::rng::{stream_id, RngStream};
use crate::stats::weighted_linear_fit;
use crate::transitions::sqrt_diffusion_step;

/// Bits of the stream id reserved for the site index.
pub const SITE_BITS: u32 = 32;

/// Nonnegative field on a periodic `L` or `L×L` lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeField {
    dims: usize,
    len: usize,
    dx: f64,
    u: Vec<f64>,
}

impl LatticeField {
    /// `u` is row-major for `dims = 2`.
    pub fn new(dims: usize, len: usize, dx: f64, u: Vec<f64>) -> Result<Self> {
        if dims != 1 && dims != 2 {
            return Err(Error::Config(format!("lattice dimension must be 1 or 2, got {dims}")));
        }
        if len < 3 {
            return Err(Error::Config(format!(
                "lattice needs at least 3 sites per side, got {len}"
            )));
        }
        if !(dx > 0.0) || !dx.is_finite() {
            return Err(Error::Config(format!("lattice spacing must be > 0, got {dx}")));
        }
        let sites = len.pow(dims as u32);
        if u.len() != sites {
            return Err(Error::Config(format!("{} values for {sites} sites", u.len())));
        }
        if let Some(i) = u.iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::Domain(format!("field value {} at site {i} is not >= 0", u[i])));
        }
        Ok(Self { dims, len, dx, u })
    }

    pub fn uniform(dims: usize, len: usize, dx: f64, value: f64) -> Result<Self> {
        Self::new(dims, len, dx, vec![value; len.pow(dims as u32)])
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn sites(&self) -> usize {
        self.u.len()
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn values(&self) -> &[f64] {
        &self.u
    }

    pub fn is_empty(&self) -> bool {
        self.u.iter().all(|v| *v == 0.0)
    }

    /// `Σ u_i · dx^dims`.
    pub fn total_mass(&self) -> f64 {
        self.u.iter().sum::<f64>() * self.dx.powi(self.dims as i32)
    }

    /// Periodic nearest neighbours of site `i` (2 in 1D, 4 in 2D).
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> {
        let l = self.len;
        let (r, c) = (i / l, i % l);
        let row = r * l;
        let horizontal = [row + (c + l - 1) % l, row + (c + 1) % l];
        let vertical = [((r + l - 1) % l) * l + c, ((r + 1) % l) * l + c];
        let n = if self.dims == 2 { 2 } else { 0 };
        horizontal.into_iter().chain(vertical.into_iter().take(n))
    }

    /// Discrete Laplacian at site `i`.
    pub fn laplacian(&self, i: usize) -> f64 {
        let s: f64 = self.neighbors(i).map(|j| self.u[j]).sum();
        (s - 2.0 * self.dims as f64 * self.u[i]) / (self.dx * self.dx)
    }

    pub fn support(&self) -> Support {
        let sites: Vec<usize> = (0..self.sites()).filter(|&i| self.u[i] > 0.0).collect();
        let shape = if sites.is_empty() {
            SupportShape::Empty
        } else if self.dims == 1 {
            SupportShape::Arc(cyclic_arc(&sites, self.len))
        } else {
            let contour = sites
                .iter()
                .copied()
                .filter(|&i| self.neighbors(i).any(|j| self.u[j] == 0.0))
                .collect();
            SupportShape::Contour(contour)
        };
        Support { sites, shape }
    }
}

/// Smallest cyclic interval containing every positive site of a 1D lattice.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Arc1d {
    /// First site of the interval.
    pub start: usize,
    /// Number of sites in the interval.
    pub length: usize,
}

impl Arc1d {
    /// Left and right extremes, unwrapped so that `max >= min`.
    pub fn extremes(&self) -> (usize, usize) {
        (self.start, self.start + self.length - 1)
    }
}

fn cyclic_arc(sorted_sites: &[usize], len: usize) -> Arc1d {
    // The arc is the complement of the widest gap between consecutive positive sites.
    let n = sorted_sites.len();
    let mut best_gap = 0;
    let mut start = sorted_sites[0];
    for k in 0..n {
        let a = sorted_sites[k];
        let b = if k + 1 < n {
            sorted_sites[k + 1]
        } else {
            sorted_sites[0] + len
        };
        let gap = b - a - 1;
        if gap > best_gap {
            best_gap = gap;
            start = b % len;
        }
    }
    Arc1d {
        start,
        length: len - best_gap,
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SupportShape {
    Empty,
    Arc(Arc1d),
    /// Positive sites with at least one zero neighbour.
    Contour(Vec<usize>),
}

/// The set `{i : u_i > 0}` and its outline.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Support {
    pub sites: Vec<usize>,
    pub shape: SupportShape,
}

/// Which lattice equation to integrate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SpdeKind {
    /// `du = Δu dt + √(σu/dx^d) dW`.
    Sbm { sigma: f64 },
    /// `dρ = (Δρ + θρ - ρ²) dt + √(ρ/dx^d) dW`.
    Contact { theta: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpdeSpec {
    pub kind: SpdeKind,
    pub dt: f64,
    pub t_max: f64,
}

impl SpdeSpec {
    /// Checks the explicit-Laplacian stability bound `dt <= dx²/(2·dims)` and the parameters.
    pub fn validate(&self, field: &LatticeField) -> Result<usize> {
        match self.kind {
            SpdeKind::Sbm { sigma } if !(sigma >= 0.0) || !sigma.is_finite() => {
                return Err(Error::Config(format!("sigma must be >= 0, got {sigma}")))
            }
            SpdeKind::Contact { theta } if !theta.is_finite() => {
                return Err(Error::Config(format!("theta must be finite, got {theta}")))
            }
            _ => {}
        }
        let bound = field.dx * field.dx / (2.0 * field.dims as f64);
        if !(self.dt > 0.0) || self.dt > bound {
            return Err(Error::Config(format!(
                "dt = {} violates the stability bound dt <= dx^2/(2 dims) = {bound}",
                self.dt
            )));
        }
        step_count(self.t_max, self.dt)
    }

    /// Scale `c` in the per-site noise `√(c·u) dW`, written as the sampler's `σ = √c`.
    fn noise_sigma(&self, field: &LatticeField) -> f64 {
        let cell = field.dx.powi(field.dims as i32);
        match self.kind {
            SpdeKind::Sbm { sigma } => (sigma / cell).sqrt(),
            SpdeKind::Contact { .. } => (1.0 / cell).sqrt(),
        }
    }
}

/// Sites updated per parallel task in the noise step.
const SITE_CHUNK: usize = 1024;

/// A field together with its per-site streams.
#[derive(Clone, Debug)]
pub struct SpdeState {
    pub field: LatticeField,
    streams: Vec<RngStream>,
    scratch: Vec<f64>,
    pub step: usize,
    pub t: f64,
}

impl SpdeState {
    /// Site `i` of run `run` draws from stream `stream_id(run, i, SITE_BITS)` under `seed`.
    pub fn new(field: LatticeField, seed: u64, run: u64) -> Self {
        let streams = (0..field.sites())
            .map(|i| RngStream::new(seed, stream_id(run, i as u64, SITE_BITS)))
            .collect();
        let scratch = vec![0.0; field.sites()];
        Self {
            field,
            streams,
            scratch,
            step: 0,
            t: 0.0,
        }
    }
}

fn noise_step(state: &mut SpdeState, sigma: f64, dt: f64) -> Result<()> {
    if sigma == 0.0 {
        return Ok(());
    }
    state
        .field
        .u
        .par_chunks_mut(SITE_CHUNK)
        .zip(state.streams.par_chunks_mut(SITE_CHUNK))
        .try_for_each(|(u, rngs)| {
            for (v, rng) in u.iter_mut().zip(rngs) {
                if *v > 0.0 {
                    *v = sqrt_diffusion_step(*v, dt, sigma, rng)?;
                }
            }
            Ok(())
        })
}

/// One splitting step of the super-random walk.
pub fn sbm_step(state: &mut SpdeState, sigma: f64, dt: f64) -> Result<()> {
    let spec = SpdeSpec {
        kind: SpdeKind::Sbm { sigma },
        dt,
        t_max: 0.0,
    };
    spec.validate(&state.field)?;
    noise_step(state, spec.noise_sigma(&state.field), dt)?;
    let f = &state.field;
    let r = dt / (f.dx * f.dx);
    let centre = 1.0 - 2.0 * f.dims as f64 * r;
    for (i, out) in state.scratch.iter_mut().enumerate() {
        let s: f64 = f.neighbors(i).map(|j| f.u[j]).sum();
        *out = centre * f.u[i] + r * s;
    }
    std::mem::swap(&mut state.field.u, &mut state.scratch);
    state.step += 1;
    state.t = state.step as f64 * dt;
    Ok(())
}

/// One splitting step of the contact-process SPDE.
///
/// A negative value after the drift step means `dt` is too large for this field;
/// it is reported as a configuration error rather than clipped.
pub fn contact_step(state: &mut SpdeState, theta: f64, dt: f64) -> Result<()> {
    let spec = SpdeSpec {
        kind: SpdeKind::Contact { theta },
        dt,
        t_max: 0.0,
    };
    spec.validate(&state.field)?;
    noise_step(state, spec.noise_sigma(&state.field), dt)?;
    let f = &state.field;
    for (i, out) in state.scratch.iter_mut().enumerate() {
        let v = f.u[i];
        let next = v + dt * (f.laplacian(i) + theta * v - v * v);
        if next < 0.0 {
            return Err(Error::Config(format!(
                "drift step produced {next} at site {i} (rho = {v}); reduce dt = {dt}"
            )));
        }
        *out = next;
    }
    std::mem::swap(&mut state.field.u, &mut state.scratch);
    state.step += 1;
    state.t = state.step as f64 * dt;
    Ok(())
}

/// Advances `state` by one step of `spec`.
pub fn spde_step(state: &mut SpdeState, spec: &SpdeSpec) -> Result<()> {
    match spec.kind {
        SpdeKind::Sbm { sigma } => sbm_step(state, sigma, spec.dt),
        SpdeKind::Contact { theta } => contact_step(state, theta, spec.dt),
    }
}

/// How a run ended.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub field: LatticeField,
    pub steps: usize,
    pub t_end: f64,
    /// Time at which the field first became identically zero.
    pub extinct_at: Option<f64>,
}

/// Runs from `init` until `spec.t_max` or extinction, whichever comes first.
///
/// `observe` sees the state after every step, and once before the first.
pub fn run_spde(
    spec: &SpdeSpec,
    init: LatticeField,
    seed: u64,
    run: u64,
    mut observe: impl FnMut(&SpdeState),
) -> Result<RunOutcome> {
    let n = spec.validate(&init)?;
    let mut state = SpdeState::new(init, seed, run);
    observe(&state);
    let mut extinct_at = state.field.is_empty().then_some(0.0);
    while extinct_at.is_none() && state.step < n {
        spde_step(&mut state, spec)?;
        observe(&state);
        if state.field.is_empty() {
            extinct_at = Some(state.t);
        }
    }
    Ok(RunOutcome {
        steps: state.step,
        t_end: state.t,
        extinct_at,
        field: state.field,
    })
}

/// Fraction of runs with positive mass at `t_max`, with its binomial standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurvivalEstimate {
    pub p: f64,
    pub se: f64,
    pub runs: usize,
}

/// Runs `0..n_runs` share `seed`, so a fixed seed gives common random numbers across parameters.
pub fn survival_probability(
    spec: &SpdeSpec,
    init: &LatticeField,
    n_runs: usize,
    seed: u64,
) -> Result<SurvivalEstimate> {
    if n_runs == 0 {
        return Err(Error::Config("need at least one run".into()));
    }
    spec.validate(init)?;
    let survived: Vec<Result<bool>> = (0..n_runs)
        .into_par_iter()
        .map(|r| {
            Ok(run_spde(spec, init.clone(), seed, r as u64, |_| {})?
                .extinct_at
                .is_none())
        })
        .collect();
    let mut alive = 0usize;
    for s in survived {
        alive += s? as usize;
    }
    let n = n_runs as f64;
    let p = alive as f64 / n;
    Ok(SurvivalEstimate {
        p,
        se: (p * (1.0 - p) / n).sqrt(),
        runs: n_runs,
    })
}

/// One evaluated point of a survival curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepPoint {
    pub theta: f64,
    pub p: f64,
    pub se: f64,
}

/// Bisection for the parameter where an increasing curve crosses `level`.
///
/// Returns the midpoint of the final bracket and every evaluated point in order.
pub fn bisect_crossing(
    mut curve: impl FnMut(f64) -> Result<(f64, f64)>,
    lo: f64,
    hi: f64,
    level: f64,
    tol: f64,
) -> Result<(f64, Vec<SweepPoint>)> {
    if !(lo < hi) || !(tol > 0.0) {
        return Err(Error::Config(format!(
            "invalid bracket [{lo}, {hi}] or tolerance {tol}"
        )));
    }
    let mut points = Vec::new();
    let mut eval = |theta: f64, points: &mut Vec<SweepPoint>| -> Result<f64> {
        let (p, se) = curve(theta)?;
        points.push(SweepPoint { theta, p, se });
        Ok(p)
    };
    let (mut a, mut b) = (lo, hi);
    let pa = eval(a, &mut points)?;
    let pb = eval(b, &mut points)?;
    if !(pa < level && pb >= level) {
        return Err(Error::Config(format!(
            "bracket [{lo}, {hi}] does not straddle {level}: curve is {pa} and {pb} at the ends"
        )));
    }
    while b - a > tol {
        let m = 0.5 * (a + b);
        if eval(m, &mut points)? < level {
            a = m;
        } else {
            b = m;
        }
    }
    Ok((0.5 * (a + b), points))
}

/// Critical-point search setup on a uniform initial field.
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaCriticalConfig {
    pub dims: usize,
    pub len: usize,
    pub dx: f64,
    pub rho0: f64,
    pub t_max: f64,
    pub runs: usize,
    pub seed: u64,
    pub bracket: (f64, f64),
    pub tol: f64,
    pub dts: Vec<f64>,
}

/// Crossing estimate at one time step.
#[derive(Clone, Debug, PartialEq)]
pub struct CriticalPoint {
    pub dt: f64,
    pub theta_c: f64,
    pub se: f64,
    pub sweep: Vec<SweepPoint>,
}

/// Per-step crossings and their linear extrapolation to `dt → 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaCriticalEstimate {
    pub points: Vec<CriticalPoint>,
    pub theta_c: f64,
    pub se: f64,
    pub slope: f64,
    pub residuals: Vec<f64>,
}

/// Standard error of a crossing: binomial error at `p = 1/2` over the local slope,
/// combined with the bisection resolution.
///
/// The slope is the secant between the last point with `p <= 1/4` and the first with
/// `p >= 3/4`, which understates a steep curve and so errs on the large side.
pub fn crossing_se(sweep: &[SweepPoint], runs: usize, tol: f64) -> f64 {
    let mut pts = sweep.to_vec();
    pts.sort_by(|a, b| a.theta.total_cmp(&b.theta));
    let low = pts.iter().rev().find(|s| s.p <= 0.25).or(pts.first());
    let high = pts.iter().find(|s| s.p >= 0.75).or(pts.last());
    let slope = match (low, high) {
        (Some(l), Some(h)) if h.theta > l.theta && h.p > l.p => (h.p - l.p) / (h.theta - l.theta),
        _ => f64::NAN,
    };
    let sampling = 0.5 / (runs as f64).sqrt() / slope;
    (sampling * sampling + 0.25 * tol * tol).sqrt()
}

/// Weighted linear fit of crossings against `dt`, evaluated at `dt = 0`.
pub fn extrapolate_theta_c(points: Vec<CriticalPoint>) -> Result<ThetaCriticalEstimate> {
    if points.len() < 2 {
        return Err(Error::Config(format!(
            "extrapolation needs at least 2 step sizes, got {}",
            points.len()
        )));
    }
    let dts: Vec<f64> = points.iter().map(|p| p.dt).collect();
    let ths: Vec<f64> = points.iter().map(|p| p.theta_c).collect();
    let ses: Vec<f64> = points.iter().map(|p| p.se).collect();
    let f = weighted_linear_fit(&dts, &ths, &ses)?;
    Ok(ThetaCriticalEstimate {
        theta_c: f.intercept,
        se: f.intercept_se,
        slope: f.slope,
        residuals: f.residuals,
        points,
    })
}

/// Bisects the survival-probability crossing of 1/2 at each `dt`, then extrapolates.
pub fn estimate_theta_c(cfg: &ThetaCriticalConfig) -> Result<ThetaCriticalEstimate> {
    if cfg.dts.len() < 2 {
        return Err(Error::Config(format!(
            "need at least 2 step sizes, got {}",
            cfg.dts.len()
        )));
    }
    let init = LatticeField::uniform(cfg.dims, cfg.len, cfg.dx, cfg.rho0)?;
    let mut points = Vec::with_capacity(cfg.dts.len());
    for &dt in &cfg.dts {
        let curve = |theta: f64| {
            let spec = SpdeSpec {
                kind: SpdeKind::Contact { theta },
                dt,
                t_max: cfg.t_max,
            };
            let s = survival_probability(&spec, &init, cfg.runs, cfg.seed)?;
            Ok((s.p, s.se))
        };
        let (theta_c, sweep) = bisect_crossing(curve, cfg.bracket.0, cfg.bracket.1, 0.5, cfg.tol)?;
        let se = crossing_se(&sweep, cfg.runs, cfg.tol);
        points.push(CriticalPoint { dt, theta_c, se, sweep });
    }
    extrapolate_theta_c(points)
}

/// True if the sweep is nondecreasing in `θ` up to the combined standard errors.
pub fn is_monotone(sweep: &[SweepPoint]) -> bool {
    let mut pts = sweep.to_vec();
    pts.sort_by(|a, b| a.theta.total_cmp(&b.theta));
    pts.windows(2)
        .all(|w| w[1].p + (w[0].se.powi(2) + w[1].se.powi(2)).sqrt() >= w[0].p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field1(u: Vec<f64>) -> LatticeField {
        let n = u.len();
        LatticeField::new(1, n, 1.0, u).unwrap()
    }

    #[test]
    fn laplacian_of_constant_and_delta() {
        let f = LatticeField::uniform(2, 5, 0.5, 3.0).unwrap();
        assert!((0..25).all(|i| f.laplacian(i) == 0.0));
        let mut u = vec![0.0; 25];
        u[12] = 1.0;
        let f = LatticeField::new(2, 5, 1.0, u).unwrap();
        assert_eq!(f.laplacian(12), -4.0);
        for j in [7, 11, 13, 17] {
            assert_eq!(f.laplacian(j), 1.0);
        }
        let mut u = vec![0.0; 8];
        u[0] = 1.0;
        let f = field1(u);
        assert_eq!(f.laplacian(0), -2.0);
        assert_eq!(f.laplacian(1), 1.0);
        assert_eq!(f.laplacian(7), 1.0);
    }

    #[test]
    fn laplacian_fourier_eigenvalue() {
        let l = 64;
        let dx = 0.5;
        let u: Vec<f64> = (0..l)
            .map(|i| (2.0 * std::f64::consts::PI * i as f64 / l as f64).sin() + 1.0)
            .collect();
        let f = LatticeField::new(1, l, dx, u.clone()).unwrap();
        let eig = -(2.0 / (dx * dx)) * (1.0 - (2.0 * std::f64::consts::PI / l as f64).cos());
        for (i, v) in u.iter().enumerate() {
            assert!((f.laplacian(i) - eig * (v - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn cyclic_arcs() {
        let mut u = vec![0.0; 10];
        assert_eq!(field1(u.clone()).support().shape, SupportShape::Empty);
        u[4] = 1.0;
        assert_eq!(
            field1(u.clone()).support().shape,
            SupportShape::Arc(Arc1d { start: 4, length: 1 })
        );
        u[6] = 1.0;
        assert_eq!(
            field1(u.clone()).support().shape,
            SupportShape::Arc(Arc1d { start: 4, length: 3 })
        );
        let mut w = vec![0.0; 10];
        w[9] = 1.0;
        w[1] = 1.0;
        let s = field1(w).support();
        assert_eq!(s.shape, SupportShape::Arc(Arc1d { start: 9, length: 3 }));
        assert_eq!(Arc1d { start: 9, length: 3 }.extremes(), (9, 11));
    }

    #[test]
    fn contour_of_square() {
        let l = 6;
        let mut u = vec![0.0; l * l];
        for r in 1..4 {
            for c in 1..4 {
                u[r * l + c] = 1.0;
            }
        }
        let f = LatticeField::new(2, l, 1.0, u).unwrap();
        let s = f.support();
        assert_eq!(s.sites.len(), 9);
        match s.shape {
            SupportShape::Contour(c) => {
                assert_eq!(c.len(), 8);
                assert!(!c.contains(&(2 * l + 2)));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn stability_bound() {
        let f = LatticeField::uniform(2, 8, 1.0, 0.1).unwrap();
        let ok = SpdeSpec {
            kind: SpdeKind::Sbm { sigma: 1.0 },
            dt: 0.25,
            t_max: 1.0,
        };
        assert!(ok.validate(&f).is_ok());
        let bad = SpdeSpec { dt: 0.3, ..ok };
        assert!(matches!(bad.validate(&f), Err(Error::Config(_))));
    }

    #[test]
    fn synthetic_crossing() {
        let curve = |th: f64| Ok((if th < 0.7321 { 0.2 } else { 0.8 }, 0.0));
        let (c, pts) = bisect_crossing(curve, 0.5, 1.0, 0.5, 1e-6).unwrap();
        assert!((c - 0.7321).abs() < 1e-6);
        assert!(is_monotone(&pts));
        let flat = |_: f64| Ok((0.9, 0.0));
        assert!(matches!(
            bisect_crossing(flat, 0.5, 1.0, 0.5, 1e-3),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn synthetic_extrapolation() {
        let points = [0.1, 0.05, 0.025]
            .iter()
            .map(|&dt| CriticalPoint {
                dt,
                theta_c: 0.777 + 0.3 * dt,
                se: 0.01,
                sweep: vec![],
            })
            .collect();
        let e = extrapolate_theta_c(points).unwrap();
        assert!((e.theta_c - 0.777).abs() < 1e-6);
        assert!((e.slope - 0.3).abs() < 1e-9);
    }

    #[test]
    fn zero_field_is_extinct_immediately() {
        let spec = SpdeSpec {
            kind: SpdeKind::Contact { theta: 2.0 },
            dt: 0.1,
            t_max: 10.0,
        };
        let out = run_spde(&spec, LatticeField::uniform(1, 16, 1.0, 0.0).unwrap(), 1, 0, |_| {}).unwrap();
        assert_eq!(out.extinct_at, Some(0.0));
        assert_eq!(out.steps, 0);
    }
}
