//! Exact one-step samplers for solvable sub-equations.
//!
//! Each sampler maps a state `X(t)` to a draw of `X(t + dt)` from the exact
//! transition law of a one-dimensional SDE, so sampled values always lie in the
//! closure of the equation's domain and the boundary keeps its character.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::rng::{NcChi2Params, RngStream};

/// Feller classification of the boundary at zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryClass {
    /// Not reached in finite time and no boundary condition is needed.
    Natural,
    /// Reached in finite time; paths stay there once they arrive.
    Absorbing,
    /// Reached in finite time; paths re-enter the interior immediately.
    Reflecting,
    /// Not reached from the interior, though the state space is closed there.
    Unattainable,
}

impl fmt::Display for BoundaryClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BoundaryClass::Natural => "natural",
            BoundaryClass::Absorbing => "absorbing",
            BoundaryClass::Reflecting => "reflecting",
            BoundaryClass::Unattainable => "unattainable",
        };
        f.write_str(s)
    }
}

/// An exact transition map for the stochastic half of a split.
///
/// `drift` and `diffusion` report the coefficients `β(x, t)` and `σ(x, t)` of the
/// sub-equation `dX = β dt + σ dW` the sampler solves.
pub trait TransitionSampler: Send + Sync {
    fn name(&self) -> &str;

    fn boundary(&self) -> BoundaryClass;

    fn drift(&self, x: f64, t: f64) -> f64;

    fn diffusion(&self, x: f64, t: f64) -> f64;

    fn step(&self, x: f64, t: f64, dt: f64, rng: &mut RngStream) -> Result<f64>;

    /// Pathwise form for samplers that are functions of the Wiener increment `dw`.
    ///
    /// Returns `None` for samplers that only reproduce the transition law.
    fn step_with_increment(&self, _x: f64, _t: f64, _dt: f64, _dw: f64) -> Option<Result<f64>> {
        None
    }
}

fn check_dt(dt: f64) -> Result<()> {
    if dt > 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("time step must be finite and > 0, got {dt}")))
    }
}

fn check_nonnegative(x: f64) -> Result<()> {
    if x >= 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("state must be finite and >= 0, got {x}")))
    }
}

/// `dX = a dt + σ √X dW`, a squared Bessel process of dimension `4a/σ²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SquaredBesselParams {
    a: f64,
    sigma: f64,
}

impl SquaredBesselParams {
    pub fn new(a: f64, sigma: f64) -> Result<Self> {
        if !(a >= 0.0) || !a.is_finite() {
            return Err(Error::Parameter(format!("drift constant a must be >= 0, got {a}")));
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::Parameter(format!("sigma must be > 0, got {sigma}")));
        }
        Ok(Self { a, sigma })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Degrees of freedom `d = 4a/σ²`.
    pub fn dof(&self) -> f64 {
        4.0 * self.a / (self.sigma * self.sigma)
    }

    pub fn boundary(&self) -> BoundaryClass {
        let d = self.dof();
        if d >= 2.0 {
            BoundaryClass::Unattainable
        } else if d > 0.0 {
            BoundaryClass::Reflecting
        } else {
            BoundaryClass::Absorbing
        }
    }
}

/// Exact step of `dX = a dt + σ√X dW`: `(σ²dt/4) · χ'²_d(4x/(σ²dt))` with `d = 4a/σ²`.
pub fn squared_bessel_step(p: SquaredBesselParams, x: f64, dt: f64, rng: &mut RngStream) -> Result<f64> {
    check_nonnegative(x)?;
    check_dt(dt)?;
    let scale = p.sigma * p.sigma * dt / 4.0;
    let lambda = x / scale;
    if !lambda.is_finite() {
        return Err(Error::Domain(format!("noncentrality overflow for x = {x}, dt = {dt}")));
    }
    let nc = NcChi2Params::new(p.dof(), lambda)?;
    Ok(scale * rng.ncx2(nc))
}

/// Exact step of the driftless `dX = σ√X dW`; zero is absorbing.
pub fn sqrt_diffusion_step(x: f64, dt: f64, sigma: f64, rng: &mut RngStream) -> Result<f64> {
    squared_bessel_step(SquaredBesselParams::new(0.0, sigma)?, x, dt, rng)
}

/// Exact geometric Brownian motion flow driven by the increment `dw`.
pub fn gbm_flow(x: f64, dt: f64, drift: f64, sigma: f64, dw: f64) -> Result<f64> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("GBM state must be >= 0, got {x}")));
    }
    check_dt(dt)?;
    Ok(x * ((drift - 0.5 * sigma * sigma) * dt + sigma * dw).exp())
}

/// Exact step of `dX = μX dt + σX dW`. Zero maps to zero.
pub fn gbm_step(x: f64, dt: f64, drift: f64, sigma: f64, rng: &mut RngStream) -> Result<f64> {
    check_dt(dt)?;
    let dw = dt.sqrt() * rng.normal();
    gbm_flow(x, dt, drift, sigma, dw)
}

/// Requested boundary behaviour for the CEV step where a choice exists.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CevBoundary {
    Reflecting,
    Absorbing,
}

/// Sampling regime of `dX = σ X^γ dW`, fixed by `γ` and the boundary choice.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CevRegime {
    /// `γ > 1`: zero is a natural boundary.
    Natural,
    /// `γ = 1 - 1/(2n)`: absorbing boundary, sampled with `d = 2 - 2n`.
    Absorbing { n: u32 },
    /// `0 <= γ < 1/2` with reflection at zero.
    Reflecting,
}

/// Parameters of the driftless CEV sub-equation `dX = σ X^γ dW`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CevParams {
    gamma: f64,
    sigma: f64,
    regime: CevRegime,
}

impl CevParams {
    /// `boundary` matters only for `γ < 1/2`; there only reflection is supported.
    pub fn new(gamma: f64, sigma: f64, boundary: CevBoundary) -> Result<Self> {
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::Parameter(format!(
                "CEV gamma must be finite and >= 0, got {gamma}"
            )));
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::Parameter(format!("CEV sigma must be > 0, got {sigma}")));
        }
        let regime = if gamma == 1.0 {
            return Err(Error::Parameter(
                "CEV gamma = 1 is geometric Brownian motion; use gbm_step".into(),
            ));
        } else if gamma > 1.0 {
            CevRegime::Natural
        } else if gamma >= 0.5 {
            let n = 1.0 / (2.0 * (1.0 - gamma));
            let rounded = n.round();
            // Accept only representation error, never a genuinely different gamma.
            if (n - rounded).abs() > 1e-9 * rounded || rounded > u32::MAX as f64 {
                return Err(Error::Parameter(format!(
                    "absorbing CEV sampling needs gamma = 1 - 1/(2n) for integer n >= 1; \
                     gamma = {gamma} gives n = {n}"
                )));
            }
            if boundary == CevBoundary::Reflecting {
                return Err(Error::Parameter(format!(
                    "zero is an exit boundary for 1/2 <= gamma < 1 (gamma = {gamma}); \
                     reflection is not available"
                )));
            }
            CevRegime::Absorbing { n: rounded as u32 }
        } else {
            if boundary == CevBoundary::Absorbing {
                return Err(Error::Unsupported(format!(
                    "absorbing boundary for gamma < 1/2 (gamma = {gamma}) needs rejection \
                     or transformation sampling, which is not implemented"
                )));
            }
            CevRegime::Reflecting
        };
        Ok(Self { gamma, sigma, regime })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn regime(&self) -> CevRegime {
        self.regime
    }

    /// Degrees of freedom of the underlying non-central χ² law.
    pub fn dof(&self) -> f64 {
        match self.regime {
            CevRegime::Absorbing { n } => 2.0 - 2.0 * n as f64,
            _ => (1.0 - 2.0 * self.gamma) / (1.0 - self.gamma),
        }
    }

    pub fn boundary(&self) -> BoundaryClass {
        match self.regime {
            CevRegime::Natural => BoundaryClass::Natural,
            CevRegime::Absorbing { .. } => BoundaryClass::Absorbing,
            CevRegime::Reflecting => BoundaryClass::Reflecting,
        }
    }

    /// Noncentrality `x^{2(1-γ)} / (σ²(γ-1)² dt)` for a step from `x`.
    pub fn noncentrality(&self, x: f64, dt: f64) -> f64 {
        let q = 1.0 - self.gamma;
        x.powf(2.0 * q) / (self.sigma * self.sigma * q * q * dt)
    }

    /// Probability that one step from `x` ends at zero (absorbing regime only).
    pub fn absorption_probability(&self, x: f64, dt: f64) -> Option<f64> {
        match self.regime {
            CevRegime::Absorbing { .. } => {
                let nc = NcChi2Params::new(self.dof(), self.noncentrality(x, dt)).ok()?;
                Some(nc.atom_at_zero())
            }
            _ => None,
        }
    }
}

/// Exact step of `dX = σ X^γ dW` via the power map to a squared Bessel process.
pub fn cev_step(p: CevParams, x: f64, dt: f64, rng: &mut RngStream) -> Result<f64> {
    check_nonnegative(x)?;
    check_dt(dt)?;
    if x == 0.0 {
        match p.regime {
            CevRegime::Natural => {
                return Err(Error::Domain(
                    "zero is unattainable for gamma > 1 and cannot be a starting state".into(),
                ))
            }
            CevRegime::Absorbing { .. } => return Ok(0.0),
            CevRegime::Reflecting => {}
        }
    }
    let q = 1.0 - p.gamma;
    let scale = q * q * p.sigma * p.sigma * dt;
    let lambda = p.noncentrality(x, dt);
    if !lambda.is_finite() {
        return Err(Error::Domain(format!("noncentrality overflow for x = {x}, dt = {dt}")));
    }
    let nc = NcChi2Params::new(p.dof(), lambda)?;
    let y = scale * rng.ncx2(nc);
    if y == 0.0 {
        return match p.regime {
            CevRegime::Natural => Err(Error::Domain(
                "non-central chi-square underflow in the natural regime".into(),
            )),
            _ => Ok(0.0),
        };
    }
    let out = y.powf(1.0 / (2.0 * q));
    if out.is_finite() {
        Ok(out)
    } else {
        Err(Error::Domain(format!("CEV step overflow from x = {x}")))
    }
}

/// Step `H⁻¹(√dt·z + H(x))` of the sub-equation whose flow is conjugate to Brownian motion by `H`.
pub fn h_transform_step<H, G>(h: H, h_inv: G, x: f64, dt: f64, rng: &mut RngStream) -> Result<f64>
where
    H: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    check_dt(dt)?;
    let dw = dt.sqrt() * rng.normal();
    h_transform_flow(h, h_inv, x, dw)
}

/// Pathwise form of [`h_transform_step`] for a given increment.
pub fn h_transform_flow<H, G>(h: H, h_inv: G, x: f64, dw: f64) -> Result<f64>
where
    H: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    let hx = h(x);
    if !hx.is_finite() {
        return Err(Error::Domain(format!("H({x}) is not finite")));
    }
    let out = h_inv(hx + dw);
    if out.is_finite() {
        Ok(out)
    } else {
        Err(Error::Domain(format!("H^-1 returned a non-finite value from x = {x}")))
    }
}

/// Leaves the state unchanged; the stochastic part of a split is empty.
#[derive(Clone, Copy, Debug, Default)]
pub struct IdentitySampler;

impl TransitionSampler for IdentitySampler {
    fn name(&self) -> &str {
        "identity"
    }

    fn boundary(&self) -> BoundaryClass {
        BoundaryClass::Natural
    }

    fn drift(&self, _x: f64, _t: f64) -> f64 {
        0.0
    }

    fn diffusion(&self, _x: f64, _t: f64) -> f64 {
        0.0
    }

    fn step(&self, x: f64, _t: f64, _dt: f64, _rng: &mut RngStream) -> Result<f64> {
        Ok(x)
    }

    fn step_with_increment(&self, x: f64, _t: f64, _dt: f64, _dw: f64) -> Option<Result<f64>> {
        Some(Ok(x))
    }
}

/// Sampler for `dX = a dt + σ√X dW`.
#[derive(Clone, Copy, Debug)]
pub struct SquaredBesselSampler(pub SquaredBesselParams);

impl TransitionSampler for SquaredBesselSampler {
    fn name(&self) -> &str {
        "squared-bessel"
    }

    fn boundary(&self) -> BoundaryClass {
        self.0.boundary()
    }

    fn drift(&self, _x: f64, _t: f64) -> f64 {
        self.0.a
    }

    fn diffusion(&self, x: f64, _t: f64) -> f64 {
        self.0.sigma * x.sqrt()
    }

    fn step(&self, x: f64, _t: f64, dt: f64, rng: &mut RngStream) -> Result<f64> {
        squared_bessel_step(self.0, x, dt, rng)
    }
}

/// Sampler for `dX = μX dt + σX dW`.
#[derive(Clone, Copy, Debug)]
pub struct GbmSampler {
    pub drift: f64,
    pub sigma: f64,
}

impl TransitionSampler for GbmSampler {
    fn name(&self) -> &str {
        "gbm"
    }

    fn boundary(&self) -> BoundaryClass {
        BoundaryClass::Natural
    }

    fn drift(&self, x: f64, _t: f64) -> f64 {
        self.drift * x
    }

    fn diffusion(&self, x: f64, _t: f64) -> f64 {
        self.sigma * x
    }

    fn step(&self, x: f64, _t: f64, dt: f64, rng: &mut RngStream) -> Result<f64> {
        gbm_step(x, dt, self.drift, self.sigma, rng)
    }

    fn step_with_increment(&self, x: f64, _t: f64, dt: f64, dw: f64) -> Option<Result<f64>> {
        Some(gbm_flow(x, dt, self.drift, self.sigma, dw))
    }
}

/// Sampler for `dX = σ X^γ dW`.
#[derive(Clone, Copy, Debug)]
pub struct CevSampler(pub CevParams);

impl TransitionSampler for CevSampler {
    fn name(&self) -> &str {
        "cev"
    }

    fn boundary(&self) -> BoundaryClass {
        self.0.boundary()
    }

    fn drift(&self, _x: f64, _t: f64) -> f64 {
        0.0
    }

    fn diffusion(&self, x: f64, _t: f64) -> f64 {
        self.0.sigma * x.powf(self.0.gamma)
    }

    fn step(&self, x: f64, _t: f64, dt: f64, rng: &mut RngStream) -> Result<f64> {
        cev_step(self.0, x, dt, rng)
    }
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Sampler `X ↦ H⁻¹(H(X) + ΔW)` for `dX = ½bb′ dt + b dW` with `H′ = 1/b`.
#[derive(Clone)]
pub struct HTransformSampler {
    name: String,
    h: ScalarFn,
    h_inv: ScalarFn,
    b: ScalarFn,
    half_bb: ScalarFn,
    boundary: BoundaryClass,
}

impl HTransformSampler {
    /// `b` is the diffusion coefficient and `half_bb` the induced drift `½ b b′`.
    pub fn new(
        name: impl Into<String>,
        h: impl Fn(f64) -> f64 + Send + Sync + 'static,
        h_inv: impl Fn(f64) -> f64 + Send + Sync + 'static,
        b: impl Fn(f64) -> f64 + Send + Sync + 'static,
        half_bb: impl Fn(f64) -> f64 + Send + Sync + 'static,
        boundary: BoundaryClass,
    ) -> Self {
        Self {
            name: name.into(),
            h: Arc::new(h),
            h_inv: Arc::new(h_inv),
            b: Arc::new(b),
            half_bb: Arc::new(half_bb),
            boundary,
        }
    }

    /// The flow `(√x + W)²` of `dX = dt + 2√X dW`.
    pub fn bessel_flow() -> Self {
        Self::new(
            "bessel-flow",
            f64::sqrt,
            |y| y * y,
            |x| 2.0 * x.sqrt(),
            |_| 1.0,
            BoundaryClass::Reflecting,
        )
    }

    /// The flow `x·e^W` of `dX = X/2 dt + X dW`.
    pub fn log_flow() -> Self {
        Self::new(
            "log-flow",
            f64::ln,
            f64::exp,
            |x| x,
            |x| 0.5 * x,
            BoundaryClass::Natural,
        )
    }
}

impl TransitionSampler for HTransformSampler {
    fn name(&self) -> &str {
        &self.name
    }

    fn boundary(&self) -> BoundaryClass {
        self.boundary
    }

    fn drift(&self, x: f64, _t: f64) -> f64 {
        (self.half_bb)(x)
    }

    fn diffusion(&self, x: f64, _t: f64) -> f64 {
        (self.b)(x)
    }

    fn step(&self, x: f64, _t: f64, dt: f64, rng: &mut RngStream) -> Result<f64> {
        h_transform_step(&*self.h, &*self.h_inv, x, dt, rng)
    }

    fn step_with_increment(&self, x: f64, _t: f64, _dt: f64, dw: f64) -> Option<Result<f64>> {
        Some(h_transform_flow(&*self.h, &*self.h_inv, x, dw))
    }
}
