use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Default between-level spread of `ln lambda`: `(ln 10)^2`.
pub fn default_shared_variance() -> f64 {
    std::f64::consts::LN_10.powi(2)
}

/// Default within-level spread of `ln lambda`: `(ln 2 / 3)^2`.
pub fn default_within_variance() -> f64 {
    (std::f64::consts::LN_2 / 3.0).powi(2)
}

/// Exchangeable log-normal prior on the per-level noise variances:
/// `ln lambda ~ N(ln(lambda_prior) 1, within I + shared J)` with `J` the
/// matrix of ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaPrior {
    pub log_center: f64,
    pub within_variance: f64,
    pub shared_variance: f64,
    /// Levels the prior vector is indexed by.
    pub levels: Vec<f64>,
    /// Multiplier of the log-density in the MAP objective.
    #[serde(default = "one")]
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}

impl LambdaPrior {
    pub fn new(log_center: f64, within_variance: f64, shared_variance: f64, levels: Vec<f64>) -> Result<Self> {
        let p = LambdaPrior {
            log_center,
            within_variance,
            shared_variance,
            levels,
            weight: 1.0,
        };
        p.validate()?;
        Ok(p)
    }

    /// Centred on a noise standard deviation equal to `fraction` of the
    /// output range, over the dataset's levels.
    pub fn for_dataset(ds: &Dataset, fraction: f64) -> Result<Self> {
        let range = ds.output_range();
        if !(range > 0.0) {
            return Err(Error::Unfittable("outputs have zero range".into()));
        }
        LambdaPrior::new(
            2.0 * (fraction * range).ln(),
            default_within_variance(),
            default_shared_variance(),
            ds.levels().iter().map(|l| l.value).collect(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("within_variance", self.within_variance),
            ("shared_variance", self.shared_variance),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter { name: name.into(), value: v });
            }
        }
        if !self.log_center.is_finite() {
            return Err(Error::InvalidParameter {
                name: "log_center".into(),
                value: self.log_center,
            });
        }
        if !(self.weight >= 0.0 && self.weight.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "weight".into(),
                value: self.weight,
            });
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Dense prior covariance `within I + shared J` of size `p`.
    pub fn covariance(&self, p: usize) -> DMatrix<f64> {
        DMatrix::from_fn(p, p, |i, j| {
            self.shared_variance + if i == j { self.within_variance } else { 0.0 }
        })
    }

    /// Closed-form precision `(1/within) (I - shared / (within + p shared) J)`.
    pub fn precision(&self, p: usize) -> DMatrix<f64> {
        let c = self.shared_variance / (self.within_variance + p as f64 * self.shared_variance);
        DMatrix::from_fn(p, p, |i, j| {
            (if i == j { 1.0 } else { 0.0 } - c) / self.within_variance
        })
    }

    /// Closed-form `ln det` of the covariance of size `p`.
    pub fn log_det(&self, p: usize) -> f64 {
        (p as f64 - 1.0) * self.within_variance.ln()
            + (self.within_variance + p as f64 * self.shared_variance).ln()
    }

    /// Log-density of `log_lambdas` (one entry per prior level).
    pub fn log_density(&self, log_lambdas: &[f64]) -> Result<f64> {
        if log_lambdas.len() != self.levels.len() {
            return Err(Error::DimensionMismatch {
                expected: self.levels.len(),
                found: log_lambdas.len(),
            });
        }
        Ok(self.log_density_unchecked(log_lambdas))
    }

    pub(crate) fn log_density_unchecked(&self, log_lambdas: &[f64]) -> f64 {
        let p = log_lambdas.len() as f64;
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for &v in log_lambdas {
            let d = v - self.log_center;
            sum += d;
            sum_sq += d * d;
        }
        let c = self.shared_variance / (self.within_variance + p * self.shared_variance);
        let quad = (sum_sq - c * sum * sum) / self.within_variance;
        -0.5 * (p * (2.0 * std::f64::consts::PI).ln() + self.log_det(log_lambdas.len()) + quad)
    }

    /// Mode (= mean) of an additional level's `ln lambda` conditional on the
    /// values at `observed` levels.
    pub fn conditional_mode(&self, observed: &[f64]) -> f64 {
        let q = observed.len() as f64;
        let excess: f64 = observed.iter().map(|v| v - self.log_center).sum();
        self.log_center + self.shared_variance / (self.within_variance + q * self.shared_variance) * excess
    }
}

/// Free function form of [`LambdaPrior::log_density`].
pub fn lambda_log_prior(log_lambdas: &[f64], prior: &LambdaPrior) -> Result<f64> {
    prior.log_density(log_lambdas)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prior(p: usize, within: f64, shared: f64) -> LambdaPrior {
        LambdaPrior::new(0.7, within, shared, (1..=p).map(|i| i as f64).collect()).unwrap()
    }

    /// Dense multivariate normal log-density through a numeric Cholesky.
    fn dense_log_density(v: &[f64], mean: f64, cov: &DMatrix<f64>) -> f64 {
        let p = v.len();
        let chol = cov.clone().cholesky().unwrap();
        let d = nalgebra::DVector::from_fn(p, |i, _| v[i] - mean);
        let sol = chol.solve(&d);
        let ld = 2.0 * chol.l().diagonal().iter().map(|x| x.ln()).sum::<f64>();
        -0.5 * (p as f64 * (2.0 * std::f64::consts::PI).ln() + ld + d.dot(&sol))
    }

    #[test]
    fn defaults() {
        assert!((default_shared_variance() - 10f64.ln().powi(2)).abs() < 1e-15);
        assert!((default_within_variance() - (2f64.ln() / 3.0).powi(2)).abs() < 1e-15);
        assert!(default_within_variance() < default_shared_variance());
    }

    #[test]
    fn two_by_two_inverse() {
        let p = prior(2, 1.0, 1.0);
        let cov = p.covariance(2);
        assert_eq!(cov, DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]));
        let expected = DMatrix::from_row_slice(2, 2, &[2.0 / 3.0, -1.0 / 3.0, -1.0 / 3.0, 2.0 / 3.0]);
        assert!((p.precision(2) - &expected).amax() < 1e-10);
        assert!((cov.try_inverse().unwrap() - expected).amax() < 1e-10);
    }

    #[test]
    fn closed_forms_match_dense_algebra() {
        let p = prior(8, default_within_variance(), default_shared_variance());
        for n in 1..=8 {
            let cov = p.covariance(n);
            let inv = cov.clone().cholesky().unwrap().inverse();
            assert!((p.precision(n) - inv).amax() < 1e-10);
            let ld = cov.clone().cholesky().unwrap().l().diagonal().iter().map(|x| 2.0 * x.ln()).sum::<f64>();
            assert!((p.log_det(n) - ld).abs() < 1e-10);
            let v: Vec<f64> = (0..n).map(|i| 0.3 * i as f64 - 1.0).collect();
            let sub = LambdaPrior { levels: p.levels[..n].to_vec(), ..p.clone() };
            let ours = sub.log_density(&v).unwrap();
            assert!((ours - dense_log_density(&v, 0.7, &cov)).abs() < 1e-10);
        }
    }

    #[test]
    fn maximised_at_centre() {
        let p = prior(4, default_within_variance(), default_shared_variance());
        let centre = vec![0.7; 4];
        let top = p.log_density(&centre).unwrap();
        assert!((top + 0.5 * (4.0 * (2.0 * std::f64::consts::PI).ln() + p.log_det(4))).abs() < 1e-12);
        for k in 0..4 {
            for h in [-0.1, 0.1] {
                let mut v = centre.clone();
                v[k] += h;
                assert!(p.log_density(&v).unwrap() < top);
            }
        }
    }

    #[test]
    fn common_shift_penalty() {
        let (within, shared) = (0.3, 2.0);
        let p = prior(5, within, shared);
        let base = p.log_density(&[0.7; 5]).unwrap();
        let delta = 1.3;
        let shifted = p.log_density(&[0.7 + delta; 5]).unwrap();
        let expected = -delta * delta * 5.0 / (2.0 * (within + 5.0 * shared));
        assert!((shifted - base - expected).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let p = prior(3, 1.0, 1.0);
        assert!(matches!(p.log_density(&[0.0; 2]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn conditional_mode_matches_dense_conditioning() {
        let p = prior(4, default_within_variance(), default_shared_variance());
        let observed = [0.1, 1.5, -0.3];
        // Gaussian conditioning of the last coordinate on the first three.
        let cov = p.covariance(4);
        let s11 = cov.view((0, 0), (3, 3)).clone_owned();
        let s21 = cov.view((3, 0), (1, 3)).clone_owned();
        let d = nalgebra::DVector::from_fn(3, |i, _| observed[i] - 0.7);
        let expected = 0.7 + (s21 * s11.try_inverse().unwrap() * d)[0];
        assert!((p.conditional_mode(&observed) - expected).abs() < 1e-12);
    }
}
