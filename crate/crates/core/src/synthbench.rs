//! Synthetic stochastic multi-fidelity simulator with a known mean and noise.
//!
//! `z = ideal(x) + error(x, t) + N(0, noise(t))` on the unit box, where the
//! numerical error `error(x, t) = a (t / t_max)^(L / 2) g(x)` vanishes as
//! `t -> 0` and the output sits on a temperature-like scale (roughly 25 to 80).

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Site};
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Purpose};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticTruth {
    pub dim: usize,
    /// Coarsest mesh size; the error term is largest there.
    pub t_max: f64,
    pub error_amplitude: f64,
    pub error_exponent: f64,
    /// Noise standard deviation is `base + slope * t / t_max`.
    pub noise_sd_base: f64,
    pub noise_sd_slope: f64,
    pub zero_noise: bool,
}

impl Default for SyntheticTruth {
    fn default() -> Self {
        SyntheticTruth {
            dim: 8,
            t_max: 100.0,
            error_amplitude: 3.0,
            error_exponent: 1.6,
            noise_sd_base: 1.0,
            noise_sd_slope: 0.6,
            zero_noise: false,
        }
    }
}

impl SyntheticTruth {
    pub fn with_dim(dim: usize) -> Self {
        SyntheticTruth {
            dim,
            ..Default::default()
        }
    }

    /// Coordinate `j` of `x`, or the box centre when `x` has fewer inputs.
    #[inline]
    fn coord(x: &[f64], j: usize) -> f64 {
        x.get(j).copied().unwrap_or(0.5)
    }

    fn check(&self, x: &[f64], t: f64) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        if x.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::OutOfBox(x.to_vec()));
        }
        if !(t > 0.0) {
            return Err(Error::NonPositiveFidelity(t));
        }
        Ok(())
    }

    /// Mean response of the error-free simulator.
    pub fn ideal_mean(&self, x: &[f64]) -> f64 {
        let c = |j| Self::coord(x, j);
        43.0 + 16.0 * c(0) + 10.0 * c(1) * c(1) - 6.0 * c(2)
            + 5.0 * c(0) * (2.0 * PI * c(3)).sin()
            + 2.0 * (PI * c(4)).cos()
            + (c(5) - 0.5)
            + 0.5 * c(6)
            + 0.25 * c(7)
    }

    /// The fidelity-independent shape `g(x)` of the numerical error.
    pub fn error_shape(&self, x: &[f64]) -> f64 {
        let c = |j| Self::coord(x, j);
        (2.0 * PI * c(0) - 1.0).cos() + 0.5 * (3.0 * c(1) + 2.0 * c(2)).sin()
    }

    pub fn error_scale(&self, t: f64) -> f64 {
        self.error_amplitude * (t / self.t_max).powf(0.5 * self.error_exponent)
    }

    /// Mean of the simulator output at `(x, t)`, without argument checks.
    pub fn mean_unchecked(&self, x: &[f64], t: f64) -> f64 {
        self.ideal_mean(x) + self.error_scale(t) * self.error_shape(x)
    }

    pub fn truth_mean(&self, x: &[f64], t: f64) -> Result<f64> {
        self.check(x, t)?;
        Ok(self.mean_unchecked(x, t))
    }

    /// Observation variance at level `t`.
    pub fn truth_noise(&self, t: f64) -> f64 {
        if self.zero_noise {
            0.0
        } else {
            (self.noise_sd_base + self.noise_sd_slope * t / self.t_max).powi(2)
        }
    }

    /// One simulator run drawing its noise from `rng`.
    pub fn synth_eval<R: Rng + ?Sized>(&self, x: &[f64], t: f64, rng: &mut R) -> Result<f64> {
        let mean = self.truth_mean(x, t)?;
        if self.zero_noise {
            return Ok(mean);
        }
        let e: f64 = StandardNormal.sample(rng);
        Ok(mean + self.truth_noise(t).sqrt() * e)
    }

    /// Runs every site; row `i` draws from stream `i` of `seed`.
    pub fn simulate(&self, sites: &[Site], seed: u64) -> Result<Dataset> {
        let mut rows = Vec::with_capacity(sites.len());
        for (i, s) in sites.iter().enumerate() {
            let mut rng = stream_rng(seed, Purpose::Simulator, i as u64);
            rows.push((s.x.clone(), s.t, self.synth_eval(&s.x, s.t, &mut rng)?));
        }
        Dataset::from_rows(&rows)
    }

    /// Brute-force Monte Carlo estimate of `P(mean(X, t) > threshold)` for
    /// `X` uniform on the unit box, with its standard error.
    pub fn truth_exceedance(&self, threshold: f64, t: f64, n_mc: usize, seed: u64) -> (f64, f64) {
        let mut rng = stream_rng(seed, Purpose::Oracle, 0);
        let mut x = vec![0.0; self.dim];
        let mut hits = 0usize;
        for _ in 0..n_mc {
            for v in x.iter_mut() {
                *v = rng.random();
            }
            if self.mean_unchecked(&x, t) > threshold {
                hits += 1;
            }
        }
        let p = hits as f64 / n_mc.max(1) as f64;
        (p, (p * (1.0 - p) / n_mc.max(1) as f64).sqrt())
    }
}
