//! Catalog of split models with their reference statistics.
//!
//! A [`SplitModel`] pairs a full equation `dX = f(X,t) dt + σ(X,t) dW` with a
//! decomposition `f = α + β`: the sub-equation `dX = β dt + σ dW` is sampled
//! exactly and `x' = α` is handed to a deterministic stepper. Registration
//! checks that the two descriptions agree.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::integrator::{BaselineMethod, BaselineScheme, Coefficient, OdeMethod, OdeStepper, SplitScheme};
use crate::transitions::{
    BoundaryClass, CevBoundary, CevParams, CevRegime, CevSampler, GbmSampler, HTransformSampler, SquaredBesselParams,
    SquaredBesselSampler, TransitionSampler,
};

/// State space of a model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    /// `[0, ∞)`.
    NonNegative,
    /// `(0, ∞)`.
    Positive,
    Real,
}

impl Domain {
    pub fn contains(&self, x: f64) -> bool {
        match self {
            Domain::NonNegative => x >= 0.0 && x.is_finite(),
            Domain::Positive => x > 0.0 && x.is_finite(),
            Domain::Real => x.is_finite(),
        }
    }
}

/// `(x0, t) ↦ E[X(t) | X(0) = x0]`.
pub type MeanFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// `(x0, h, dw) ↦ X(n·h)` from `n` Wiener increments on a grid of spacing `h`.
pub type PathwiseFn = Arc<dyn Fn(f64, f64, &[f64]) -> f64 + Send + Sync>;

/// Reference information available for validation.
#[derive(Clone)]
pub struct KnownStats {
    pub mean: Option<MeanFn>,
    pub pathwise: Option<PathwiseFn>,
    pub boundary: BoundaryClass,
}

impl KnownStats {
    pub fn boundary_only(boundary: BoundaryClass) -> Self {
        Self {
            mean: None,
            pathwise: None,
            boundary,
        }
    }
}

/// A model and its splitting.
#[derive(Clone)]
pub struct SplitModel {
    name: String,
    domain: Domain,
    step1: Arc<dyn TransitionSampler>,
    step2: OdeStepper,
    drift: Coefficient,
    diffusion: Coefficient,
    stats: KnownStats,
}

impl fmt::Debug for SplitModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SplitModel")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("step1", &self.step1.name())
            .field("step2", &self.step2.method())
            .field("boundary", &self.stats.boundary)
            .finish()
    }
}

/// Points at which registration compares the split against the full equation.
const CHECK_STATES: [f64; 7] = [0.05, 0.3, 0.7, 1.0, 1.9, 4.0, 11.0];
const CHECK_TIMES: [f64; 3] = [0.0, 0.5, 2.0];
const CHECK_TOLERANCE: f64 = 1e-12;

impl SplitModel {
    /// Builds a model and verifies `α + β = f` and that the Step-1 diffusion is `σ`.
    pub fn new(
        name: impl Into<String>,
        domain: Domain,
        step1: Arc<dyn TransitionSampler>,
        step2: OdeStepper,
        drift: Coefficient,
        diffusion: Coefficient,
        stats: KnownStats,
    ) -> Result<Self> {
        let m = Self {
            name: name.into(),
            domain,
            step1,
            step2,
            drift,
            diffusion,
            stats,
        };
        m.check_consistency()?;
        Ok(m)
    }

    pub fn check_consistency(&self) -> Result<()> {
        for &x in &CHECK_STATES {
            for &t in &CHECK_TIMES {
                let f = (self.drift)(x, t);
                let split = self.step2.drift(x, t) + self.step1.drift(x, t);
                let g = (self.diffusion)(x, t);
                let g1 = self.step1.diffusion(x, t);
                if (f - split).abs() > CHECK_TOLERANCE * f.abs().max(1.0) {
                    return Err(Error::Config(format!(
                        "model '{}': alpha + beta = {split} but drift = {f} at x = {x}, t = {t}",
                        self.name
                    )));
                }
                if (g - g1).abs() > CHECK_TOLERANCE * g.abs().max(1.0) {
                    return Err(Error::Config(format!(
                        "model '{}': step-1 diffusion {g1} differs from {g} at x = {x}, t = {t}",
                        self.name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn boundary(&self) -> BoundaryClass {
        self.stats.boundary
    }

    pub fn stats(&self) -> &KnownStats {
        &self.stats
    }

    pub fn step1(&self) -> &Arc<dyn TransitionSampler> {
        &self.step1
    }

    pub fn step2(&self) -> &OdeStepper {
        &self.step2
    }

    pub fn drift(&self, x: f64, t: f64) -> f64 {
        (self.drift)(x, t)
    }

    pub fn diffusion(&self, x: f64, t: f64) -> f64 {
        (self.diffusion)(x, t)
    }

    /// Same model with another deterministic method for the drift `α`.
    pub fn with_step2_method(mut self, method: OdeMethod) -> Result<Self> {
        let alpha = {
            let s = self.step2.clone();
            Arc::new(move |x, t| s.drift(x, t)) as Coefficient
        };
        self.step2 = OdeStepper::new(method, alpha);
        self.check_consistency()?;
        Ok(self)
    }

    pub fn split_scheme(&self) -> SplitScheme {
        SplitScheme::new(self.step1.clone(), self.step2.clone())
    }

    pub fn baseline(&self, method: BaselineMethod) -> BaselineScheme {
        BaselineScheme::new(method, self.drift.clone(), self.diffusion.clone())
    }

    pub fn exact_mean(&self, x0: f64, t: f64) -> Option<f64> {
        self.stats.mean.as_ref().map(|m| m(x0, t))
    }

    pub fn pathwise_solution(&self, x0: f64, h: f64, dw: &[f64]) -> Option<f64> {
        self.stats.pathwise.as_ref().map(|p| p(x0, h, dw))
    }
}

fn coef(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Coefficient {
    Arc::new(f)
}

fn test_equation_mean() -> MeanFn {
    Arc::new(|x0, t| (x0 + 1.0) * t.exp() - 1.0)
}

/// Splitting of `dX = (1 + X) dt + 2√X dW`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TestEquationSplit {
    /// `β = 0`: exact driftless square-root diffusion, then `x' = 1 + x`.
    Transition,
    /// `β = 1`: the flow `(√x + W)²`, then `x' = x`.
    BesselFlow,
}

pub fn test_equation(split: TestEquationSplit) -> SplitModel {
    let drift = coef(|x, _| 1.0 + x);
    let diffusion = coef(|x, _| 2.0 * x.sqrt());
    let stats = KnownStats {
        mean: Some(test_equation_mean()),
        pathwise: None,
        boundary: BoundaryClass::Reflecting,
    };
    let (name, step1, step2): (_, Arc<dyn TransitionSampler>, _) = match split {
        TestEquationSplit::Transition => (
            "test-equation",
            Arc::new(SquaredBesselSampler(SquaredBesselParams::new(0.0, 2.0).expect("valid"))),
            OdeStepper::euler(|x, _| 1.0 + x),
        ),
        TestEquationSplit::BesselFlow => (
            "test-equation-bessel",
            Arc::new(HTransformSampler::bessel_flow()),
            OdeStepper::euler(|x, _| x),
        ),
    };
    SplitModel::new(name, Domain::NonNegative, step1, step2, drift, diffusion, stats)
        .expect("test equation split is consistent")
}

/// Exact Ginzburg–Landau solution on a fine grid, with the time integral by the trapezoid rule.
pub fn ginzburg_landau_pathwise(x0: f64, h: f64, dw: &[f64]) -> f64 {
    if x0 == 0.0 {
        return 0.0;
    }
    let mut w = 0.0;
    let mut integral = 0.0;
    let mut prev = 1.0;
    for (i, inc) in dw.iter().enumerate() {
        w += inc;
        let s = (i + 1) as f64 * h;
        let cur = (s + 2.0 * w).exp();
        integral += 0.5 * h * (prev + cur);
        prev = cur;
    }
    let t = dw.len() as f64 * h;
    x0 * (0.5 * t + w).exp() / (1.0 + 2.0 * x0 * x0 * integral).sqrt()
}

/// `dX = (X - X³) dt + X dW`, split as geometric Brownian motion plus `x' = -x³`.
pub fn ginzburg_landau() -> SplitModel {
    let stats = KnownStats {
        mean: None,
        pathwise: Some(Arc::new(ginzburg_landau_pathwise)),
        boundary: BoundaryClass::Natural,
    };
    SplitModel::new(
        "ginzburg-landau",
        Domain::NonNegative,
        Arc::new(GbmSampler { drift: 1.0, sigma: 1.0 }),
        OdeStepper::gl_nonstandard(),
        coef(|x, _| x - x * x * x),
        coef(|x, _| x),
        stats,
    )
    .expect("Ginzburg-Landau split is consistent")
}

/// Step-2 treatment of a linear drift `b·x`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LinearStep {
    Euler,
    Exact,
}

fn linear_stepper(rate: f64, step: LinearStep) -> OdeStepper {
    match step {
        LinearStep::Euler => OdeStepper::euler(move |x, _| rate * x),
        LinearStep::Exact => OdeStepper::exact_linear(rate),
    }
}

/// `dX = (a + bX) dt + σ√X dW`.
pub fn cir(a: f64, b: f64, sigma: f64, step: LinearStep) -> Result<SplitModel> {
    if !b.is_finite() {
        return Err(Error::Parameter(format!("b must be finite, got {b}")));
    }
    let p = SquaredBesselParams::new(a, sigma)?;
    let boundary = if a == 0.0 {
        BoundaryClass::Absorbing
    } else if 2.0 * a >= sigma * sigma {
        BoundaryClass::Unattainable
    } else {
        BoundaryClass::Reflecting
    };
    let mean: MeanFn = if b == 0.0 {
        Arc::new(move |x0, t| x0 + a * t)
    } else {
        Arc::new(move |x0, t| (x0 + a / b) * (b * t).exp() - a / b)
    };
    SplitModel::new(
        "cir",
        Domain::NonNegative,
        Arc::new(SquaredBesselSampler(p)),
        linear_stepper(b, step),
        coef(move |x, _| a + b * x),
        coef(move |x, _| sigma * x.sqrt()),
        KnownStats {
            mean: Some(mean),
            pathwise: None,
            boundary,
        },
    )
}

/// `dX = μX dt + σX^γ dW`.
pub fn cev(mu: f64, sigma: f64, gamma: f64, boundary: CevBoundary, step: LinearStep) -> Result<SplitModel> {
    if !mu.is_finite() {
        return Err(Error::Parameter(format!("mu must be finite, got {mu}")));
    }
    let p = CevParams::new(gamma, sigma, boundary)?;
    // Only with absorption is the discounted process a true martingale.
    let mean: Option<MeanFn> = match p.regime() {
        CevRegime::Absorbing { .. } => Some(Arc::new(move |x0, t| x0 * (mu * t).exp())),
        _ => None,
    };
    SplitModel::new(
        "cev",
        Domain::NonNegative,
        Arc::new(CevSampler(p)),
        linear_stepper(mu, step),
        coef(move |x, _| mu * x),
        coef(move |x, _| sigma * x.powf(gamma)),
        KnownStats {
            mean,
            pathwise: None,
            boundary: p.boundary(),
        },
    )
}

/// `dX = λX dt + σX dW`, sampled exactly.
pub fn gbm(lambda: f64, sigma: f64) -> Result<SplitModel> {
    if !lambda.is_finite() || !sigma.is_finite() {
        return Err(Error::Parameter("lambda and sigma must be finite".into()));
    }
    let pathwise: PathwiseFn = Arc::new(move |x0, h, dw| {
        let t = dw.len() as f64 * h;
        let w: f64 = dw.iter().sum();
        x0 * ((lambda - 0.5 * sigma * sigma) * t + sigma * w).exp()
    });
    SplitModel::new(
        "gbm",
        Domain::NonNegative,
        Arc::new(GbmSampler { drift: lambda, sigma }),
        OdeStepper::zero(),
        coef(move |x, _| lambda * x),
        coef(move |x, _| sigma * x),
        KnownStats {
            mean: Some(Arc::new(move |x0, t| x0 * (lambda * t).exp())),
            pathwise: Some(pathwise),
            boundary: BoundaryClass::Natural,
        },
    )
}

/// `dX = [α(X,t) + λX] dt + σX dW`, split as geometric Brownian motion plus `x' = α`.
pub fn linear_plus_drift(alpha: OdeStepper, lambda: f64, sigma: f64) -> Result<SplitModel> {
    if !lambda.is_finite() || !sigma.is_finite() {
        return Err(Error::Parameter("lambda and sigma must be finite".into()));
    }
    let a = alpha.clone();
    SplitModel::new(
        "linear-plus-drift",
        Domain::NonNegative,
        Arc::new(GbmSampler { drift: lambda, sigma }),
        alpha,
        coef(move |x, t| a.drift(x, t) + lambda * x),
        coef(move |x, _| sigma * x),
        KnownStats::boundary_only(BoundaryClass::Natural),
    )
}

/// Drift split `α = f - ½σσ′`, `β = ½σσ′`.
#[derive(Clone)]
pub struct SigmaSplit {
    pub alpha: Coefficient,
    pub beta: Coefficient,
}

/// Splits `f` so that `dX = β dt + σ dW` is conjugate to Brownian motion.
///
/// Without `dsigma` the derivative is a central difference, or a forward one where
/// the central stencil leaves the domain of `σ`.
pub fn rewrite_sigma_split(f: Coefficient, sigma: Coefficient, dsigma: Option<Coefficient>) -> SigmaSplit {
    let ds: Coefficient = match dsigma {
        Some(d) => d,
        None => {
            let s = sigma.clone();
            Arc::new(move |x: f64, t| {
                let h = 1e-6 * x.abs().max(1.0);
                let central = (s(x + h, t) - s(x - h, t)) / (2.0 * h);
                if central.is_finite() {
                    central
                } else {
                    (s(x + h, t) - s(x, t)) / h
                }
            })
        }
    };
    let s = sigma.clone();
    let beta: Coefficient = Arc::new(move |x, t| 0.5 * s(x, t) * ds(x, t));
    let b = beta.clone();
    let alpha: Coefficient = Arc::new(move |x, t| f(x, t) - b(x, t));
    SigmaSplit { alpha, beta }
}

/// A numeric or textual model parameter.
#[derive(Clone, Debug, PartialEq)]
pub enum ParamValue {
    Number(f64),
    Text(String),
}

pub type Params = BTreeMap<String, ParamValue>;

/// Name, summary and accepted parameters of a catalog entry.
#[derive(Clone, Debug)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub summary: &'static str,
    pub params: &'static [&'static str],
}

pub const CATALOG: &[CatalogEntry] = &[
    CatalogEntry {
        name: "test-equation",
        summary: "dX = (1+X)dt + 2 sqrt(X) dW; exact square-root diffusion + drift 1+x",
        params: &["step2"],
    },
    CatalogEntry {
        name: "test-equation-bessel",
        summary: "dX = (1+X)dt + 2 sqrt(X) dW; flow (sqrt(x)+W)^2 + drift x",
        params: &["step2"],
    },
    CatalogEntry {
        name: "ginzburg-landau",
        summary: "dX = (X - X^3)dt + X dW; exact GBM + nonstandard cubic step",
        params: &["step2"],
    },
    CatalogEntry {
        name: "cir",
        summary: "dX = (a + bX)dt + sigma sqrt(X) dW",
        params: &["a", "b", "sigma", "step2"],
    },
    CatalogEntry {
        name: "cev",
        summary: "dX = mu X dt + sigma X^gamma dW",
        params: &["mu", "sigma", "gamma", "boundary", "step2"],
    },
    CatalogEntry {
        name: "gbm",
        summary: "dX = lambda X dt + sigma X dW, exact",
        params: &["lambda", "sigma"],
    },
    CatalogEntry {
        name: "linear-plus-drift",
        summary: "dX = (c X^p + lambda X)dt + sigma X dW",
        params: &["lambda", "sigma", "alpha_coeff", "alpha_power", "step2"],
    },
];

pub fn catalog_names() -> Vec<&'static str> {
    CATALOG.iter().map(|e| e.name).collect()
}

struct ParamReader<'a> {
    model: &'a str,
    params: &'a Params,
}

impl ParamReader<'_> {
    fn number(&self, key: &str, default: f64) -> Result<f64> {
        match self.params.get(key) {
            None => Ok(default),
            Some(ParamValue::Number(v)) => Ok(*v),
            Some(ParamValue::Text(s)) => Err(Error::Config(format!(
                "model '{}': parameter '{key}' must be a number, got '{s}'",
                self.model
            ))),
        }
    }

    fn text<'b>(&'b self, key: &str, default: &'b str) -> Result<&'b str> {
        match self.params.get(key) {
            None => Ok(default),
            Some(ParamValue::Text(s)) => Ok(s),
            Some(ParamValue::Number(v)) => Err(Error::Config(format!(
                "model '{}': parameter '{key}' must be text, got {v}",
                self.model
            ))),
        }
    }
}

fn parse_method(model: &str, s: &str) -> Result<OdeMethod> {
    match s {
        "euler" => Ok(OdeMethod::ExplicitEuler),
        "heun" => Ok(OdeMethod::Heun),
        "rk4" => Ok(OdeMethod::Rk4),
        "gl-nonstandard" => Ok(OdeMethod::GlNonstandard),
        other => Err(Error::Config(format!(
            "model '{model}': unknown step2 '{other}' (euler, heun, rk4, gl-nonstandard, exact)"
        ))),
    }
}

/// Step-2 choice for a linear drift: `exact` or a generic method.
fn linear_choice(model: &str, s: &str) -> Result<Option<LinearStep>> {
    match s {
        "exact" => Ok(Some(LinearStep::Exact)),
        "euler" => Ok(Some(LinearStep::Euler)),
        _ => parse_method(model, s).map(|_| None),
    }
}

/// Builds a catalog model from its name and parameter map.
pub fn by_name(name: &str, params: &Params) -> Result<SplitModel> {
    let entry = CATALOG.iter().find(|e| e.name == name).ok_or_else(|| {
        Error::Config(format!(
            "unknown model '{name}'; available: {}",
            catalog_names().join(", ")
        ))
    })?;
    if let Some(k) = params.keys().find(|k| !entry.params.contains(&k.as_str())) {
        return Err(Error::Config(format!(
            "model '{name}' has no parameter '{k}'; accepted: {}",
            entry.params.join(", ")
        )));
    }
    let r = ParamReader { model: name, params };
    let generic = |m: SplitModel, step2: &str, default: &str| -> Result<SplitModel> {
        if step2 == default {
            Ok(m)
        } else {
            let method = parse_method(name, step2)?;
            if method == OdeMethod::GlNonstandard && name != "ginzburg-landau" {
                return Err(Error::Config(format!(
                    "model '{name}': gl-nonstandard only integrates x' = -x^3"
                )));
            }
            m.with_step2_method(method)
        }
    };
    match name {
        "test-equation" => generic(
            test_equation(TestEquationSplit::Transition),
            r.text("step2", "euler")?,
            "euler",
        ),
        "test-equation-bessel" => generic(
            test_equation(TestEquationSplit::BesselFlow),
            r.text("step2", "euler")?,
            "euler",
        ),
        "ginzburg-landau" => generic(ginzburg_landau(), r.text("step2", "gl-nonstandard")?, "gl-nonstandard"),
        "cir" => {
            let step2 = r.text("step2", "euler")?;
            let (a, b, sigma) = (r.number("a", 1.0)?, r.number("b", 1.0)?, r.number("sigma", 1.0)?);
            match linear_choice(name, step2)? {
                Some(s) => cir(a, b, sigma, s),
                None => generic(cir(a, b, sigma, LinearStep::Euler)?, step2, "euler"),
            }
        }
        "cev" => {
            let boundary = match r.text("boundary", "absorbing")? {
                "absorbing" => CevBoundary::Absorbing,
                "reflecting" => CevBoundary::Reflecting,
                other => {
                    return Err(Error::Config(format!(
                        "model 'cev': boundary must be absorbing or reflecting, got '{other}'"
                    )))
                }
            };
            let step2 = r.text("step2", "euler")?;
            let (mu, sigma, gamma) = (r.number("mu", 0.1)?, r.number("sigma", 1.0)?, r.number("gamma", 0.75)?);
            match linear_choice(name, step2)? {
                Some(s) => cev(mu, sigma, gamma, boundary, s),
                None => generic(cev(mu, sigma, gamma, boundary, LinearStep::Euler)?, step2, "euler"),
            }
        }
        "gbm" => gbm(r.number("lambda", 1.0)?, r.number("sigma", 1.0)?),
        "linear-plus-drift" => {
            let c = r.number("alpha_coeff", 0.0)?;
            let p = r.number("alpha_power", 1.0)?;
            let step2 = r.text("step2", "euler")?;
            let method = parse_method(name, step2)?;
            if method == OdeMethod::GlNonstandard && !(c == -1.0 && p == 3.0) {
                return Err(Error::Config(
                    "model 'linear-plus-drift': gl-nonstandard needs alpha_coeff = -1, alpha_power = 3".into(),
                ));
            }
            let alpha = OdeStepper::new(method, coef(move |x: f64, _| c * x.powf(p)));
            linear_plus_drift(alpha, r.number("lambda", 1.0)?, r.number("sigma", 1.0)?)
        }
        _ => unreachable!("catalog entry without constructor"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn test_equation_mean_values() {
        let m = test_equation(TestEquationSplit::Transition);
        let v = m.exact_mean(1.0, 1.0).unwrap();
        assert!((v - (2.0 * std::f64::consts::E - 1.0)).abs() < 1e-15);
        assert!((v - 4.43656).abs() < 1e-5);
        assert_eq!(m.exact_mean(0.0, 0.0).unwrap(), 0.0);
        assert_eq!(m.exact_mean(2.5, 0.0).unwrap(), 2.5);
    }

    #[test]
    fn bessel_variant_flow() {
        let m = test_equation(TestEquationSplit::BesselFlow);
        for w in [-1.5, -0.2, 0.0, 0.7] {
            let v = m.step1().step_with_increment(1.0, 0.0, 0.1, w).unwrap().unwrap();
            assert!((v - (1.0 + w) * (1.0 + w)).abs() < 1e-15);
        }
    }

    #[test]
    fn gl_noiseless_reduction() {
        // W ≡ 0 leaves x' = x/2 - x³, solved by x0 e^{t/2} / sqrt(1 + 2x0²(e^t - 1)).
        let h = 1e-4;
        let dw = vec![0.0; 10_000];
        for x0 in [0.3, 1.0, 2.0] {
            let exact = x0 * 0.5f64.exp() / (1.0 + 2.0 * x0 * x0 * (1f64.exp() - 1.0)).sqrt();
            let v = ginzburg_landau_pathwise(x0, h, &dw);
            assert!((v - exact).abs() < 1e-6, "x0 = {x0}: {v} vs {exact}");
        }
        assert_eq!(ginzburg_landau_pathwise(0.0, h, &dw), 0.0);
    }

    #[test]
    fn gl_noiseless_matches_rk4() {
        let s = OdeStepper::new(OdeMethod::Rk4, coef(|x, _| 0.5 * x - x * x * x));
        let mut x = 1.7;
        for i in 0..1000 {
            x = s.step(x, i as f64 * 1e-3, 1e-3).unwrap();
        }
        let v = ginzburg_landau_pathwise(1.7, 1e-4, &vec![0.0; 10_000]);
        assert!((v - x).abs() < 1e-6);
    }

    #[test]
    fn cir_boundary_classes() {
        assert_eq!(
            cir(1.0, 1.0, 1.0, LinearStep::Euler).unwrap().boundary(),
            BoundaryClass::Unattainable
        );
        assert_eq!(
            cir(0.3, 1.0, 1.0, LinearStep::Euler).unwrap().boundary(),
            BoundaryClass::Reflecting
        );
        assert_eq!(
            cir(0.0, 1.0, 1.0, LinearStep::Euler).unwrap().boundary(),
            BoundaryClass::Absorbing
        );
        let m = cir(1.0, 1.0, 1.0, LinearStep::Exact).unwrap();
        assert!((m.exact_mean(1.0, 1.0).unwrap() - (2.0 * std::f64::consts::E - 1.0)).abs() < 1e-14);
        let m0 = cir(0.0, 0.0, 1.0, LinearStep::Euler).unwrap();
        assert_eq!(m0.exact_mean(1.3, 5.0).unwrap(), 1.3);
    }

    #[test]
    fn cev_mean_only_when_absorbing() {
        assert!(cev(0.1, 1.0, 0.75, CevBoundary::Absorbing, LinearStep::Euler)
            .unwrap()
            .exact_mean(1.0, 1.0)
            .is_some());
        assert!(cev(0.1, 1.0, 0.25, CevBoundary::Reflecting, LinearStep::Euler)
            .unwrap()
            .exact_mean(1.0, 1.0)
            .is_none());
        assert!(cev(0.1, 1.0, 1.5, CevBoundary::Reflecting, LinearStep::Euler)
            .unwrap()
            .exact_mean(1.0, 1.0)
            .is_none());
        assert!(cev(0.1, 1.0, 1.0, CevBoundary::Absorbing, LinearStep::Euler).is_err());
    }

    #[test]
    fn inconsistent_split_rejected() {
        let e = SplitModel::new(
            "bad",
            Domain::NonNegative,
            Arc::new(GbmSampler { drift: 1.0, sigma: 1.0 }),
            OdeStepper::zero(),
            coef(|x, _| 2.0 * x),
            coef(|x, _| x),
            KnownStats::boundary_only(BoundaryClass::Natural),
        );
        assert!(matches!(e, Err(Error::Config(_))));
        let e = SplitModel::new(
            "bad-sigma",
            Domain::NonNegative,
            Arc::new(GbmSampler { drift: 1.0, sigma: 1.0 }),
            OdeStepper::zero(),
            coef(|x, _| x),
            coef(|x, _| 2.0 * x),
            KnownStats::boundary_only(BoundaryClass::Natural),
        );
        assert!(e.is_err());
    }

    #[test]
    fn gl_via_linear_plus_drift() {
        let m = linear_plus_drift(OdeStepper::gl_nonstandard(), 1.0, 1.0).unwrap();
        let gl = ginzburg_landau();
        let (s1, s2) = (m.split_scheme(), gl.split_scheme());
        use crate::integrator::Scheme;
        for dw in [-0.3, 0.0, 0.4] {
            assert_eq!(
                s1.advance_with_increment(1.2, 0.0, 0.05, dw).unwrap(),
                s2.advance_with_increment(1.2, 0.0, 0.05, dw).unwrap()
            );
        }
    }

    #[test]
    fn sigma_rewrite_recovers_bessel_split() {
        let split = rewrite_sigma_split(coef(|x, _| 1.0 + x), coef(|x, _| 2.0 * x.sqrt()), None);
        for x in [1e-3, 0.5, 1.0, 3.0] {
            assert!(((split.beta)(x, 0.0) - 1.0).abs() < 1e-6, "x = {x}");
            assert!(((split.alpha)(x, 0.0) - x).abs() < 1e-6);
        }
        let exact = rewrite_sigma_split(
            coef(|x, _| 1.0 + x),
            coef(|x, _| 2.0 * x.sqrt()),
            Some(coef(|x, _| 1.0 / x.sqrt())),
        );
        assert!(((exact.beta)(2.0, 0.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sigma_rewrite_constant_and_linear() {
        let c = rewrite_sigma_split(coef(|x, _| -x), coef(|_, _| 0.7), None);
        assert!((c.beta)(1.3, 0.0).abs() < 1e-9);
        let l = rewrite_sigma_split(coef(|x, _| x), coef(|x, _| x), None);
        assert!(((l.beta)(3.0, 0.0) - 1.5).abs() < 1e-8);
        // β = x/2 is exactly the drift induced by H = log.
        let h = HTransformSampler::log_flow();
        assert!(((l.beta)(3.0, 0.0) - h.drift(3.0, 0.0)).abs() < 1e-8);
    }

    #[test]
    fn by_name_dispatch() {
        let p = Params::new();
        for name in catalog_names() {
            let m = by_name(name, &p).unwrap();
            assert_eq!(m.name(), name);
        }
        let e = by_name("nope", &p).unwrap_err();
        assert!(e.to_string().contains("ginzburg-landau"));
        let mut bad = Params::new();
        bad.insert("zeta".into(), ParamValue::Number(1.0));
        assert!(by_name("cir", &bad).is_err());
        let mut q = Params::new();
        q.insert("step2".into(), ParamValue::Text("exact".into()));
        q.insert("a".into(), ParamValue::Number(0.0));
        let m = by_name("cir", &q).unwrap();
        assert_eq!(m.step2().method(), OdeMethod::ExactLinear { rate: 1.0 });
        let mut r = Params::new();
        r.insert("step2".into(), ParamValue::Text("rk4".into()));
        assert_eq!(by_name("test-equation", &r).unwrap().step2().method(), OdeMethod::Rk4);
        r.insert("step2".into(), ParamValue::Text("gl-nonstandard".into()));
        assert!(by_name("test-equation", &r).is_err());
    }
}
