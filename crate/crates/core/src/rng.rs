//! Stream-addressable random variates.
//!
//! Every Monte Carlo quantity in the crate is drawn from an [`RngStream`],
//! addressed by a `(seed, stream_id)` pair. Streams are ChaCha8 keystreams:
//! the seed selects the key and the stream id selects the 64-bit nonce, so
//! distinct ids under one seed never share state and a given address yields
//! the same sequence on every platform.
//!
//! Besides uniforms and normals the stream samples Poisson, central χ² and
//! non-central χ² variates. The non-central sampler draws `K ~ Poisson(λ/2)`
//! and returns a central `χ²_{d+2K}`, which also covers `d = 0, -2, -4, …`
//! by treating a central χ² with nonpositive degrees of freedom as the point
//! mass at zero.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};

use crate::error::{Error, Result};

/// Means below this are sampled by sequential inversion, above by rejection.
pub const POISSON_INVERSION_LIMIT: f64 = 10.0;

/// Noncentralities above this replace `K ~ Poisson(λ/2)` by a rounded normal draw.
pub const LARGE_LAMBDA_THRESHOLD: f64 = 1e8;

/// A reproducible pseudorandom stream.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    core: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut core = ChaCha8Rng::seed_from_u64(seed);
        core.set_stream(stream_id);
        Self { seed, stream_id, core }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.core.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal variate.
    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.core)
    }

    /// Poisson variate with the given mean.
    pub fn poisson(&mut self, mean: f64) -> Result<u64> {
        if !(mean >= 0.0) || !mean.is_finite() {
            return Err(Error::Parameter(format!(
                "Poisson mean must be finite and >= 0, got {mean}"
            )));
        }
        if mean == 0.0 {
            return Ok(0);
        }
        if mean < POISSON_INVERSION_LIMIT {
            return Ok(self.poisson_inversion(mean));
        }
        let dist = Poisson::new(mean).map_err(|e| Error::Parameter(e.to_string()))?;
        let k: f64 = dist.sample(&mut self.core);
        Ok(k as u64)
    }

    fn poisson_inversion(&mut self, mean: f64) -> u64 {
        let u = self.uniform();
        let mut k = 0u64;
        let mut p = (-mean).exp();
        let mut cdf = p;
        while u >= cdf {
            k += 1;
            p *= mean / k as f64;
            let next = cdf + p;
            // Remaining mass is below rounding; u sits in the unreachable tail.
            if next == cdf && k as f64 > mean {
                break;
            }
            cdf = next;
        }
        k
    }

    /// Central χ² variate with `d > 0` degrees of freedom.
    pub fn chi2(&mut self, d: f64) -> Result<f64> {
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::Parameter(format!(
                "chi-square degrees of freedom must be finite and > 0, got {d}"
            )));
        }
        Ok(self.gamma_scale2(d / 2.0))
    }

    fn gamma_scale2(&mut self, shape: f64) -> f64 {
        // shape > 0 and finite is checked by every caller.
        let dist = Gamma::new(shape, 2.0).expect("valid gamma shape");
        dist.sample(&mut self.core)
    }

    /// Non-central χ² variate. The result is `>= 0` for every admissible parameter pair.
    pub fn ncx2(&mut self, p: NcChi2Params) -> f64 {
        let half = p.lambda / 2.0;
        let k = if p.lambda > LARGE_LAMBDA_THRESHOLD {
            (half + half.sqrt() * self.normal()).round().max(0.0)
        } else {
            // half is finite and nonnegative by construction of NcChi2Params.
            self.poisson(half).expect("validated Poisson mean") as f64
        };
        let dof = p.d + 2.0 * k;
        if dof <= 0.0 {
            0.0
        } else {
            self.gamma_scale2(dof / 2.0)
        }
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.core.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.core.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.core.fill_bytes(dst)
    }
}

/// Packs a block index and an item index into one stream id.
///
/// The low `low_bits` bits hold `item`; panics if either part does not fit.
pub fn stream_id(block: u64, item: u64, low_bits: u32) -> u64 {
    assert!(low_bits > 0 && low_bits < 64, "low_bits must be in 1..64");
    assert!(item < (1u64 << low_bits), "item index {item} exceeds {low_bits} bits");
    assert!(
        block < (1u64 << (64 - low_bits)),
        "block index {block} exceeds {} bits",
        64 - low_bits
    );
    (block << low_bits) | item
}

/// Parameters of a non-central χ² law.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NcChi2Params {
    d: f64,
    lambda: f64,
}

impl NcChi2Params {
    /// `d` must be positive, or an even nonpositive integer; `lambda >= 0`.
    pub fn new(d: f64, lambda: f64) -> Result<Self> {
        if !d.is_finite() {
            return Err(Error::Parameter(format!("degrees of freedom must be finite, got {d}")));
        }
        if d <= 0.0 && !is_even_nonpositive(d) {
            return Err(Error::Parameter(format!(
                "degrees of freedom must be > 0 or one of 0, -2, -4, ...; got {d}"
            )));
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::Parameter(format!(
                "noncentrality must be finite and >= 0, got {lambda}"
            )));
        }
        Ok(Self { d, lambda })
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mean(&self) -> f64 {
        self.d + self.lambda
    }

    /// Probability of an exact zero: the Poisson mass of `j <= |d|/2` for `d <= 0`, else 0.
    pub fn atom_at_zero(&self) -> f64 {
        if self.d > 0.0 {
            return 0.0;
        }
        let half = self.lambda / 2.0;
        let jmax = (-self.d / 2.0) as u64;
        let mut term = (-half).exp();
        let mut sum = term;
        for j in 1..=jmax {
            term *= half / j as f64;
            sum += term;
        }
        sum.min(1.0)
    }
}

fn is_even_nonpositive(d: f64) -> bool {
    d <= 0.0 && d.fract() == 0.0 && (d / 2.0).fract() == 0.0
}
