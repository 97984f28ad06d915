//! Split and baseline time-stepping schemes.
//!
//! A [`SplitScheme`] advances one step by sampling the stochastic sub-equation
//! exactly and then integrating the remaining drift with an [`OdeStepper`].
//! [`BaselineScheme`] holds the classical one-step methods used for comparison.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::transitions::TransitionSampler;

/// A coefficient `(x, t) ↦ value`.
pub type Coefficient = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

pub fn coefficient(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Coefficient {
    Arc::new(f)
}

/// Deterministic one-step method for the drift sub-equation `x' = α(x, t)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OdeMethod {
    ExplicitEuler,
    Heun,
    Rk4,
    /// Partially implicit step for `x' = -x³`, nonnegative while `x²·dt < 2`.
    GlNonstandard,
    /// Exact flow `x·e^{rate·dt}` of `x' = rate·x`.
    ExactLinear {
        rate: f64,
    },
}

impl fmt::Display for OdeMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OdeMethod::ExplicitEuler => f.write_str("euler"),
            OdeMethod::Heun => f.write_str("heun"),
            OdeMethod::Rk4 => f.write_str("rk4"),
            OdeMethod::GlNonstandard => f.write_str("gl-nonstandard"),
            OdeMethod::ExactLinear { rate } => write!(f, "exact-linear({rate})"),
        }
    }
}

/// Closed-form solution of `y = x - (dt/2)·x²·(x + y)`.
pub fn gl_nonstandard_step(x: f64, dt: f64) -> f64 {
    let h = 0.5 * dt * x * x;
    x * (1.0 - h) / (1.0 + h)
}

/// An [`OdeMethod`] bound to its drift.
#[derive(Clone)]
pub struct OdeStepper {
    method: OdeMethod,
    drift: Coefficient,
}

impl fmt::Debug for OdeStepper {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OdeStepper")
            .field("method", &self.method)
            .finish_non_exhaustive()
    }
}

impl OdeStepper {
    /// For `GlNonstandard` and `ExactLinear` the drift is informational only; the
    /// step uses the closed form, and the model catalog checks the two agree.
    pub fn new(method: OdeMethod, drift: Coefficient) -> Self {
        Self { method, drift }
    }

    pub fn euler(drift: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(OdeMethod::ExplicitEuler, Arc::new(drift))
    }

    /// The stepper for `x' = 0`.
    pub fn zero() -> Self {
        Self::new(OdeMethod::ExplicitEuler, Arc::new(|_, _| 0.0))
    }

    pub fn gl_nonstandard() -> Self {
        Self::new(OdeMethod::GlNonstandard, Arc::new(|x, _| -x * x * x))
    }

    pub fn exact_linear(rate: f64) -> Self {
        Self::new(OdeMethod::ExactLinear { rate }, Arc::new(move |x, _| rate * x))
    }

    pub fn method(&self) -> OdeMethod {
        self.method
    }

    pub fn drift(&self, x: f64, t: f64) -> f64 {
        (self.drift)(x, t)
    }

    pub fn step(&self, x: f64, t: f64, dt: f64) -> Result<f64> {
        let f = &self.drift;
        let y = match self.method {
            OdeMethod::ExplicitEuler => x + dt * f(x, t),
            OdeMethod::Heun => {
                let k1 = f(x, t);
                let k2 = f(x + dt * k1, t + dt);
                x + 0.5 * dt * (k1 + k2)
            }
            OdeMethod::Rk4 => {
                let h2 = 0.5 * dt;
                let k1 = f(x, t);
                let k2 = f(x + h2 * k1, t + h2);
                let k3 = f(x + h2 * k2, t + h2);
                let k4 = f(x + dt * k3, t + dt);
                x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            }
            OdeMethod::GlNonstandard => gl_nonstandard_step(x, dt),
            OdeMethod::ExactLinear { rate } => x * (rate * dt).exp(),
        };
        if y.is_finite() {
            Ok(y)
        } else {
            Err(Error::Domain(format!(
                "{} step from x = {x} is not finite",
                self.method
            )))
        }
    }
}

/// A one-step method for a scalar SDE.
pub trait Scheme: Send + Sync {
    fn name(&self) -> &str;

    fn advance(&self, x: f64, t: f64, dt: f64, rng: &mut RngStream) -> Result<f64>;

    /// Advance with a prescribed Wiener increment, for pathwise (strong) comparisons.
    fn advance_with_increment(&self, x: f64, t: f64, dt: f64, dw: f64) -> Result<f64>;
}

/// Exact stochastic sub-step followed by a deterministic drift sub-step.
#[derive(Clone)]
pub struct SplitScheme {
    name: String,
    step1: Arc<dyn TransitionSampler>,
    step2: OdeStepper,
}

impl SplitScheme {
    pub fn new(step1: Arc<dyn TransitionSampler>, step2: OdeStepper) -> Self {
        let name = format!("split[{}+{}]", step1.name(), step2.method());
        Self { name, step1, step2 }
    }

    pub fn step1(&self) -> &dyn TransitionSampler {
        &*self.step1
    }

    pub fn step2(&self) -> &OdeStepper {
        &self.step2
    }
}

impl Scheme for SplitScheme {
    fn name(&self) -> &str {
        &self.name
    }

    fn advance(&self, x: f64, t: f64, dt: f64, rng: &mut RngStream) -> Result<f64> {
        let mid = self.step1.step(x, t, dt, rng)?;
        self.step2.step(mid, t, dt)
    }

    fn advance_with_increment(&self, x: f64, t: f64, dt: f64, dw: f64) -> Result<f64> {
        let mid = self.step1.step_with_increment(x, t, dt, dw).ok_or_else(|| {
            Error::Unsupported(format!(
                "sampler '{}' has no pathwise form in the Wiener increment",
                self.step1.name()
            ))
        })??;
        self.step2.step(mid, t, dt)
    }
}

/// Classical comparison schemes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BaselineMethod {
    EulerMaruyama,
    /// Euler–Maruyama with the diffusion evaluated at `|x|`.
    AbsSqrtEuler,
    /// Implicit drift stage followed by an explicit noise stage.
    SplitStepBackwardEuler,
}

impl fmt::Display for BaselineMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BaselineMethod::EulerMaruyama => "euler-maruyama",
            BaselineMethod::AbsSqrtEuler => "abs-sqrt-euler",
            BaselineMethod::SplitStepBackwardEuler => "split-step-backward-euler",
        })
    }
}

pub const IMPLICIT_TOLERANCE: f64 = 1e-12;
pub const IMPLICIT_MAX_ITERATIONS: usize = 100;
const IMPLICIT_DAMPING: f64 = 0.5;

/// A baseline method applied to the full drift `f` and diffusion `σ`.
#[derive(Clone)]
pub struct BaselineScheme {
    method: BaselineMethod,
    name: String,
    drift: Coefficient,
    diffusion: Coefficient,
}

impl BaselineScheme {
    pub fn new(method: BaselineMethod, drift: Coefficient, diffusion: Coefficient) -> Self {
        Self {
            method,
            name: method.to_string(),
            drift,
            diffusion,
        }
    }

    pub fn method(&self) -> BaselineMethod {
        self.method
    }

    fn implicit_drift_stage(&self, x: f64, t: f64, dt: f64) -> Result<f64> {
        let f = &self.drift;
        let mut y = x;
        for _ in 0..IMPLICIT_MAX_ITERATIONS {
            let target = x + dt * f(y, t + dt);
            let next = (1.0 - IMPLICIT_DAMPING) * y + IMPLICIT_DAMPING * target;
            if !next.is_finite() {
                break;
            }
            if (next - y).abs() <= IMPLICIT_TOLERANCE * next.abs().max(1.0) {
                return Ok(next);
            }
            y = next;
        }
        Err(Error::NoConvergence(format!(
            "implicit drift stage from x = {x} with dt = {dt} did not converge in \
             {IMPLICIT_MAX_ITERATIONS} iterations"
        )))
    }
}

impl Scheme for BaselineScheme {
    fn name(&self) -> &str {
        &self.name
    }

    fn advance(&self, x: f64, t: f64, dt: f64, rng: &mut RngStream) -> Result<f64> {
        let dw = dt.sqrt() * rng.normal();
        self.advance_with_increment(x, t, dt, dw)
    }

    fn advance_with_increment(&self, x: f64, t: f64, dt: f64, dw: f64) -> Result<f64> {
        let (f, g) = (&self.drift, &self.diffusion);
        let y = match self.method {
            BaselineMethod::EulerMaruyama => x + f(x, t) * dt + g(x, t) * dw,
            BaselineMethod::AbsSqrtEuler => x + f(x, t) * dt + g(x.abs(), t) * dw,
            BaselineMethod::SplitStepBackwardEuler => {
                let z = self.implicit_drift_stage(x, t, dt)?;
                z + g(z, t) * dw
            }
        };
        if y.is_finite() {
            Ok(y)
        } else {
            Err(Error::Domain(format!(
                "{} step from x = {x} is not finite",
                self.method
            )))
        }
    }
}

/// A grid of `n` equal steps ending exactly at `t_end`.
pub fn uniform_grid(t_end: f64, dt: f64) -> Result<Vec<f64>> {
    let n = step_count(t_end, dt)?;
    let mut grid: Vec<f64> = (0..=n).map(|i| i as f64 * dt).collect();
    grid[n] = t_end;
    Ok(grid)
}

/// Number of steps of size `dt` in `[0, t_end]`; `t_end/dt` must be an integer.
pub fn step_count(t_end: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !dt.is_finite() || !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(Error::Config(format!(
            "need dt > 0 and t >= 0, got dt = {dt}, t = {t_end}"
        )));
    }
    let n = (t_end / dt).round();
    if (n * dt - t_end).abs() > 1e-9 * t_end.max(dt) {
        return Err(Error::Config(format!(
            "t = {t_end} is not a whole number of steps dt = {dt}"
        )));
    }
    Ok(n as usize)
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Config("time grid is empty".into()));
    }
    if grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::Config("time grid has non-finite entries".into()));
    }
    if let Some(w) = grid.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::Config(format!(
            "time grid is not strictly increasing at index {}: {} then {}",
            w + 1,
            grid[w],
            grid[w + 1]
        )));
    }
    Ok(())
}

fn abort(step: usize, t: f64, e: Error) -> Error {
    Error::PathAborted {
        step,
        t,
        source: Box::new(e),
    }
}

/// Values of the scheme at every grid point, starting from `x0` at `grid[0]`.
pub fn simulate_path(scheme: &dyn Scheme, x0: f64, grid: &[f64], rng: &mut RngStream) -> Result<Vec<f64>> {
    check_grid(grid)?;
    let mut out = Vec::with_capacity(grid.len());
    out.push(x0);
    let mut x = x0;
    for (i, w) in grid.windows(2).enumerate() {
        x = scheme
            .advance(x, w[0], w[1] - w[0], rng)
            .map_err(|e| abort(i, w[0], e))?;
        out.push(x);
    }
    Ok(out)
}

/// Like [`simulate_path`] with prescribed increments, one per grid interval.
pub fn simulate_path_with_increments(scheme: &dyn Scheme, x0: f64, grid: &[f64], dw: &[f64]) -> Result<Vec<f64>> {
    check_grid(grid)?;
    if dw.len() + 1 != grid.len() {
        return Err(Error::Config(format!(
            "{} increments for a grid of {} points",
            dw.len(),
            grid.len()
        )));
    }
    let mut out = Vec::with_capacity(grid.len());
    out.push(x0);
    let mut x = x0;
    for (i, (w, &inc)) in grid.windows(2).zip(dw).enumerate() {
        x = scheme
            .advance_with_increment(x, w[0], w[1] - w[0], inc)
            .map_err(|e| abort(i, w[0], e))?;
        out.push(x);
    }
    Ok(out)
}

/// Final value after `n` equal steps of size `dt` from time 0, without storing the path.
pub fn terminal_value(scheme: &dyn Scheme, x0: f64, dt: f64, n: usize, rng: &mut RngStream) -> Result<f64> {
    let mut x = x0;
    for i in 0..n {
        let t = i as f64 * dt;
        x = scheme.advance(x, t, dt, rng).map_err(|e| abort(i, t, e))?;
    }
    Ok(x)
}
