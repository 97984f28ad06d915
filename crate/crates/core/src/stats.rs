//! Streaming moments and least-squares fitting.

use crate::error::{Error, Result};

/// Running count, mean and centred second moment (Welford), mergeable (Chan et al.).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let (na, nb) = (self.n as f64, other.n as f64);
        self.mean += delta * nb / n as f64;
        self.m2 += other.m2 + delta * delta * na * nb / n as f64;
        self.n = n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; zero for fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        if self.n == 0 {
            return f64::NAN;
        }
        (self.variance() / self.n as f64).sqrt()
    }
}

impl FromIterator<f64> for Moments {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut m = Moments::new();
        for x in iter {
            m.push(x);
        }
        m
    }
}

/// Ordinary least-squares fit `y = intercept + slope·x`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub intercept_se: f64,
    pub residuals: Vec<f64>,
}

impl LinearFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

/// OLS with standard errors from the residual variance (`n - 2` degrees of freedom).
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() {
        return Err(Error::Fit(format!("length mismatch: {} x vs {} y", x.len(), y.len())));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::Fit(format!("need at least 2 points, got {n}")));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Fit("non-finite input".into()));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|xi| (xi - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("all abscissae are equal".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(xi, yi)| (xi - mx) * (yi - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = x.iter().zip(y).map(|(xi, yi)| yi - intercept - slope * xi).collect();
    let (slope_se, intercept_se) = if n > 2 {
        let s2 = residuals.iter().map(|r| r * r).sum::<f64>() / (nf - 2.0);
        let slope_se = (s2 / sxx).sqrt();
        (slope_se, (s2 * (1.0 / nf + mx * mx / sxx)).sqrt())
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(LinearFit {
        slope,
        intercept,
        slope_se,
        intercept_se,
        residuals,
    })
}

/// Weighted least squares with weights `1/σ_i²`; standard errors come from the weights.
pub fn weighted_linear_fit(x: &[f64], y: &[f64], sigma: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() || x.len() != sigma.len() {
        return Err(Error::Fit("length mismatch".into()));
    }
    if x.len() < 2 {
        return Err(Error::Fit(format!("need at least 2 points, got {}", x.len())));
    }
    if sigma.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
        return Err(Error::Fit("weights need finite positive standard errors".into()));
    }
    let w: Vec<f64> = sigma.iter().map(|s| 1.0 / (s * s)).collect();
    let sw: f64 = w.iter().sum();
    let mx = w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() / sw;
    let my = w.iter().zip(y).map(|(w, y)| w * y).sum::<f64>() / sw;
    let sxx: f64 = w.iter().zip(x).map(|(w, x)| w * (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("all abscissae are equal".into()));
    }
    let sxy: f64 = w.iter().zip(x).zip(y).map(|((w, x), y)| w * (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals = x.iter().zip(y).map(|(xi, yi)| yi - intercept - slope * xi).collect();
    Ok(LinearFit {
        slope,
        intercept,
        slope_se: (1.0 / sxx).sqrt(),
        intercept_se: (1.0 / sw + mx * mx / sxx).sqrt(),
        residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn welford_matches_two_pass() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.3 + 1e6).collect();
        let m: Moments = xs.iter().copied().collect();
        let mean = xs.iter().sum::<f64>() / 1000.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 999.0;
        assert!((m.mean() - mean).abs() < 1e-8);
        assert!((m.variance() - var).abs() < 1e-8 * var);
    }

    #[test]
    fn merge_equals_sequential() {
        let xs: Vec<f64> = (0..777).map(|i| (i as f64).sin()).collect();
        let all: Moments = xs.iter().copied().collect();
        let mut parts = Moments::new();
        for chunk in xs.chunks(100) {
            parts.merge(&chunk.iter().copied().collect());
        }
        assert_eq!(parts.count(), 777);
        assert!((parts.mean() - all.mean()).abs() < 1e-14);
        assert!((parts.variance() - all.variance()).abs() < 1e-13);
    }

    #[test]
    fn exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let f = linear_fit(&x, &y).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14);
        assert!((f.intercept - 1.0).abs() < 1e-14);
        assert!(f.slope_se < 1e-12);
        assert!(f.residuals.iter().all(|r| r.abs() < 1e-14));
    }

    #[test]
    fn slope_se_oracle() {
        let x = [0.0, 1.0, 2.0, 3.0, 4.0];
        let y = [0.0, 1.0, 1.0, 3.0, 3.0];
        let f = linear_fit(&x, &y).unwrap();
        assert!((f.slope - 0.8).abs() < 1e-14);
        assert!((f.intercept - 0.0).abs() < 1e-14);
        // residuals 0, 0.2, -0.6, 0.6, -0.2 → SSE 0.8, s² = 0.8/3, Sxx = 10.
        assert!((f.slope_se - (0.8f64 / 30.0).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn fit_errors() {
        assert!(linear_fit(&[1.0], &[1.0]).is_err());
        assert!(linear_fit(&[1.0, 1.0], &[1.0, 2.0]).is_err());
        assert!(linear_fit(&[1.0, 2.0], &[1.0]).is_err());
        assert!(linear_fit(&[1.0, 2.0], &[f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn weighted_reduces_to_ols_for_equal_weights() {
        let x = [0.0, 1.0, 2.0, 3.0, 4.0];
        let y = [0.0, 1.0, 1.0, 3.0, 3.0];
        let a = linear_fit(&x, &y).unwrap();
        let b = weighted_linear_fit(&x, &y, &[1.0; 5]).unwrap();
        assert!((a.slope - b.slope).abs() < 1e-14);
        assert!((a.intercept - b.intercept).abs() < 1e-14);
    }
}
