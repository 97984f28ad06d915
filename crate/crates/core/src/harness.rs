//! Weak and strong error studies with log-log order fits.
//!
//! Paths run in parallel in fixed-size chunks; each chunk reduces its paths in
//! index order and chunks are merged in index order, so a study is a pure
//! function of its configuration whatever the thread count.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::integrator::{step_count, terminal_value, Scheme};
use crate::models::SplitModel;
use crate::rng::{stream_id, RngStream};
use crate::stats::{linear_fit, Moments};

/// Paths per reduction chunk.
pub const CHUNK: usize = 1024;

/// Bits of the stream id reserved for the path index.
pub const PATH_BITS: u32 = 40;

/// Least-squares slope of `log(error)` against `log(dt)`.
#[derive(Clone, Debug, PartialEq)]
pub struct OrderFit {
    pub slope: f64,
    pub intercept: f64,
    /// Twice the standard error of the slope.
    pub half_width: f64,
    pub residuals: Vec<f64>,
}

impl OrderFit {
    pub fn contains(&self, lo: f64, hi: f64) -> bool {
        self.slope >= lo && self.slope <= hi
    }
}

/// Errors measured at a sequence of step sizes.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorSeries {
    pub label: String,
    pub dts: Vec<f64>,
    pub errors: Vec<f64>,
    pub stderrs: Vec<f64>,
    /// Errors at or below this are indistinguishable from rounding.
    pub noise_floor: f64,
}

impl ErrorSeries {
    pub fn fit(&self) -> Result<OrderFit> {
        fit_order(&self.dts, &self.errors, self.noise_floor)
    }
}

/// Fits `error ≈ C·dt^slope`. Needs at least three points with positive errors,
/// and at least two of them above `noise_floor`.
pub fn fit_order(dts: &[f64], errors: &[f64], noise_floor: f64) -> Result<OrderFit> {
    if dts.len() != errors.len() {
        return Err(Error::Fit(format!(
            "{} step sizes but {} errors",
            dts.len(),
            errors.len()
        )));
    }
    if dts.len() < 3 {
        return Err(Error::Fit(format!(
            "an order fit needs at least 3 step sizes, got {}",
            dts.len()
        )));
    }
    if let Some(i) = errors.iter().position(|e| !(*e > 0.0) || !e.is_finite()) {
        return Err(Error::Fit(format!(
            "error at dt = {} is {}, not positive",
            dts[i], errors[i]
        )));
    }
    if dts.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::Fit("step sizes must be positive".into()));
    }
    let above = errors.iter().filter(|e| **e > noise_floor).count();
    if above < 2 {
        return Err(Error::Fit(format!(
            "degenerate series: errors are at the noise floor {noise_floor:e}"
        )));
    }
    let x: Vec<f64> = dts.iter().map(|d| d.ln()).collect();
    let y: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let f = linear_fit(&x, &y)?;
    Ok(OrderFit {
        slope: f.slope,
        intercept: f.intercept,
        half_width: 2.0 * f.slope_se,
        residuals: f.residuals,
    })
}

/// Runs `paths` independent path computations and reduces them in index order.
pub(crate) fn reduce_paths<F>(paths: usize, width: usize, f: F) -> Result<Vec<Moments>>
where
    F: Fn(usize, &mut [f64]) -> Result<()> + Sync,
{
    let chunks: Vec<Result<Vec<Moments>>> = (0..paths.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![Moments::new(); width];
            let mut buf = vec![0.0; width];
            for p in c * CHUNK..((c + 1) * CHUNK).min(paths) {
                f(p, &mut buf)?;
                for (m, v) in acc.iter_mut().zip(&buf) {
                    m.push(*v);
                }
            }
            Ok(acc)
        })
        .collect();
    let mut total = vec![Moments::new(); width];
    for chunk in chunks {
        for (t, m) in total.iter_mut().zip(chunk?) {
            t.merge(&m);
        }
    }
    Ok(total)
}

/// Setup of a weak-error study.
#[derive(Clone, Debug, PartialEq)]
pub struct WeakConfig {
    pub x0: f64,
    pub t: f64,
    pub dts: Vec<f64>,
    pub paths: usize,
    pub seed: u64,
}

/// `|mean of X̃(t) - E X(t)|` with standard error `std/√paths`.
///
/// `level` selects a disjoint block of streams so different step sizes use independent draws.
#[allow(clippy::too_many_arguments)]
pub fn weak_error(
    model: &SplitModel,
    scheme: &dyn Scheme,
    x0: f64,
    t: f64,
    dt: f64,
    paths: usize,
    seed: u64,
    level: u64,
) -> Result<(f64, f64)> {
    let exact = model
        .exact_mean(x0, t)
        .ok_or_else(|| Error::Unsupported(format!("model '{}' has no known conditional mean", model.name())))?;
    if paths < 2 {
        return Err(Error::Config(format!("need at least 2 paths, got {paths}")));
    }
    let n = step_count(t, dt)?;
    let m = reduce_paths(paths, 1, |p, out| {
        let mut rng = RngStream::new(seed, stream_id(level, p as u64, PATH_BITS));
        out[0] = terminal_value(scheme, x0, dt, n, &mut rng)?;
        Ok(())
    })?;
    Ok(((m[0].mean() - exact).abs(), m[0].std_error()))
}

pub fn weak_series(model: &SplitModel, scheme: &dyn Scheme, label: &str, cfg: &WeakConfig) -> Result<ErrorSeries> {
    let mut errors = Vec::with_capacity(cfg.dts.len());
    let mut stderrs = Vec::with_capacity(cfg.dts.len());
    for (level, &dt) in cfg.dts.iter().enumerate() {
        let (e, se) = weak_error(model, scheme, cfg.x0, cfg.t, dt, cfg.paths, cfg.seed, level as u64)?;
        errors.push(e);
        stderrs.push(se);
    }
    let scale = model.exact_mean(cfg.x0, cfg.t).unwrap_or(1.0).abs().max(1.0);
    Ok(ErrorSeries {
        label: label.to_string(),
        dts: cfg.dts.clone(),
        errors,
        stderrs,
        noise_floor: 1e-12 * scale,
    })
}

/// How the strong-error reference solution is obtained on the fine grid.
pub enum Reference<'a> {
    /// The model's exact pathwise solution.
    Exact,
    /// A scheme run with the fine increments themselves.
    FineScheme(&'a dyn Scheme),
}

/// Setup of a strong-error study.
#[derive(Clone, Debug, PartialEq)]
pub struct StrongConfig {
    pub x0: f64,
    pub t: f64,
    pub dts: Vec<f64>,
    /// Spacing of the shared Wiener path; every `dt` must be a multiple of it.
    pub fine_dt: f64,
    /// Error exponent, 1 or 2.
    pub k: u32,
    pub paths: usize,
    pub seed: u64,
}

/// Sums consecutive groups of `ratio` fine increments, left to right.
pub fn aggregate_increments(fine: &[f64], ratio: usize, out: &mut Vec<f64>) {
    out.clear();
    out.extend(fine.chunks(ratio).map(|c| c.iter().sum::<f64>()));
}

/// `(E|X_ref(t) - X̃(t)|^k)^{1/k}` for several schemes and step sizes on shared Wiener paths.
///
/// The standard error comes from the delta method applied to the sample mean of `|·|^k`.
pub fn strong_series(
    model: &SplitModel,
    schemes: &[(&str, &dyn Scheme)],
    reference: Reference<'_>,
    cfg: &StrongConfig,
) -> Result<Vec<ErrorSeries>> {
    if cfg.k != 1 && cfg.k != 2 {
        return Err(Error::Config(format!(
            "strong error exponent k must be 1 or 2, got {}",
            cfg.k
        )));
    }
    if cfg.paths < 2 {
        return Err(Error::Config(format!("need at least 2 paths, got {}", cfg.paths)));
    }
    if matches!(reference, Reference::Exact) && model.stats().pathwise.is_none() {
        return Err(Error::Unsupported(format!(
            "model '{}' has no exact pathwise solution; use a fine-scheme reference",
            model.name()
        )));
    }
    let n_fine = step_count(cfg.t, cfg.fine_dt)?;
    let ratios = cfg
        .dts
        .iter()
        .map(|&dt| {
            let r = step_count(dt, cfg.fine_dt)?;
            if r == 0 || n_fine % r != 0 {
                return Err(Error::Config(format!(
                    "dt = {dt} is not a divisor of t on the fine grid {}",
                    cfg.fine_dt
                )));
            }
            Ok(r)
        })
        .collect::<Result<Vec<usize>>>()?;
    let width = schemes.len() * cfg.dts.len();
    let sqrt_h = cfg.fine_dt.sqrt();
    let k = cfg.k as i32;

    let moments = reduce_paths(cfg.paths, width + 1, |p, out| {
        let mut rng = RngStream::new(cfg.seed, stream_id(0, p as u64, PATH_BITS));
        let fine: Vec<f64> = (0..n_fine).map(|_| sqrt_h * rng.normal()).collect();
        let x_ref = match reference {
            Reference::Exact => model.pathwise_solution(cfg.x0, cfg.fine_dt, &fine).expect("checked"),
            Reference::FineScheme(s) => path_end(s, cfg.x0, cfg.fine_dt, &fine)?,
        };
        let mut coarse = Vec::new();
        for (si, (_, scheme)) in schemes.iter().enumerate() {
            for (di, (&dt, &ratio)) in cfg.dts.iter().zip(&ratios).enumerate() {
                aggregate_increments(&fine, ratio, &mut coarse);
                let x = path_end(*scheme, cfg.x0, dt, &coarse)?;
                out[si * cfg.dts.len() + di] = (x_ref - x).abs().powi(k);
            }
        }
        out[width] = x_ref.abs();
        Ok(())
    })?;
    let noise_floor = 1e-9 * moments[width].mean().max(1e-300);
    Ok(schemes
        .iter()
        .enumerate()
        .map(|(si, (label, _))| {
            let (mut errors, mut stderrs) = (Vec::new(), Vec::new());
            for di in 0..cfg.dts.len() {
                let m = &moments[si * cfg.dts.len() + di];
                let e = m.mean().powf(1.0 / cfg.k as f64);
                let se = if e > 0.0 {
                    m.std_error() / (cfg.k as f64 * e.powi(k - 1))
                } else {
                    0.0
                };
                errors.push(e);
                stderrs.push(se);
            }
            ErrorSeries {
                label: label.to_string(),
                dts: cfg.dts.clone(),
                errors,
                stderrs,
                noise_floor,
            }
        })
        .collect())
}

fn path_end(scheme: &dyn Scheme, x0: f64, dt: f64, dw: &[f64]) -> Result<f64> {
    let mut x = x0;
    for (i, inc) in dw.iter().enumerate() {
        let t = i as f64 * dt;
        x = scheme
            .advance_with_increment(x, t, dt, *inc)
            .map_err(|e| Error::PathAborted {
                step: i,
                t,
                source: Box::new(e),
            })?;
    }
    Ok(x)
}

/// `dt_max·2^{-i}` for `i = 0..count`.
pub fn halving_dts(dt_max: f64, count: usize) -> Vec<f64> {
    (0..count).map(|i| dt_max * 0.5f64.powi(i as i32)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_laws() {
        let dts = halving_dts(0.125, 6);
        let lin: Vec<f64> = dts.iter().map(|d| 3.0 * d).collect();
        let f = fit_order(&dts, &lin, 0.0).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-9);
        let half: Vec<f64> = dts.iter().map(|d| 0.7 * d.sqrt()).collect();
        let f = fit_order(&dts, &half, 0.0).unwrap();
        assert!((f.slope - 0.5).abs() < 1e-9);
    }

    #[test]
    fn noisy_power_law() {
        let dts = halving_dts(0.125, 6);
        let mut rng = RngStream::new(4, 4);
        let noisy: Vec<f64> = dts.iter().map(|d| 2.0 * d * (1.0 + 0.05 * rng.normal())).collect();
        let f = fit_order(&dts, &noisy, 0.0).unwrap();
        assert!((f.slope - 1.0).abs() < 0.1, "slope {}", f.slope);
    }

    #[test]
    fn fit_preconditions() {
        assert!(fit_order(&[0.1, 0.05], &[1.0, 0.5], 0.0).is_err());
        assert!(fit_order(&[0.1, 0.05, 0.025], &[1.0, 0.0, 0.2], 0.0).is_err());
        assert!(fit_order(&[0.1, 0.05, 0.025], &[1e-17, 2e-17, 1e-17], 1e-12).is_err());
    }

    #[test]
    fn aggregation_is_exact_sum() {
        let fine = [0.1, -0.2, 0.3, 0.4, 0.5, -0.6];
        let mut out = Vec::new();
        aggregate_increments(&fine, 2, &mut out);
        assert_eq!(out, vec![0.1 + -0.2, 0.3 + 0.4, 0.5 + -0.6]);
    }
}
