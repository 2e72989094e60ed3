//! Covariance functions.
//!
//! Three model variants share the same building blocks:
//!
//! * [`KernelSpec::TwoScale`]: `k0(x - x') + r(t, t') * k_eps(x - x')` with an
//!   anisotropic Matérn `k0` for the ideal (zero-fidelity) response, an
//!   anisotropic Matérn `k_eps` for the numerical error and the Brownian-power
//!   correlation `r(t, t') = (min(t, t') / t_scale)^L`.
//! * [`KernelSpec::StationaryJoint`]: one anisotropic Matérn on the
//!   concatenated `(x, t)` coordinates.
//! * [`KernelSpec::SingleLevel`]: an anisotropic Matérn on `x` alone, for data
//!   from a single fidelity level.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Half-integer Matérn smoothness with a closed-form correlation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Smoothness {
    #[serde(rename = "1/2")]
    Half,
    #[serde(rename = "3/2")]
    ThreeHalves,
    #[default]
    #[serde(rename = "5/2")]
    FiveHalves,
}

impl Smoothness {
    /// Matérn correlation as a function of the scaled distance `r >= 0`.
    #[inline]
    pub fn correlation(self, r: f64) -> f64 {
        match self {
            Smoothness::Half => (-r).exp(),
            Smoothness::ThreeHalves => {
                let a = 3f64.sqrt() * r;
                (1.0 + a) * (-a).exp()
            }
            Smoothness::FiveHalves => {
                let a = 5f64.sqrt() * r;
                (1.0 + a + a * a / 3.0) * (-a).exp()
            }
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Smoothness::Half => "1/2",
            Smoothness::ThreeHalves => "3/2",
            Smoothness::FiveHalves => "5/2",
        }
    }
}

impl std::str::FromStr for Smoothness {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "1/2" | "0.5" => Ok(Smoothness::Half),
            "3/2" | "1.5" => Ok(Smoothness::ThreeHalves),
            "5/2" | "2.5" => Ok(Smoothness::FiveHalves),
            other => Err(Error::Config(format!(
                "smoothness must be one of 1/2, 3/2, 5/2 (got `{other}`)"
            ))),
        }
    }
}

/// Parameters of a stationary anisotropic Matérn covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaternParams {
    pub variance: f64,
    pub lengthscales: Vec<f64>,
    pub smoothness: Smoothness,
}

impl MaternParams {
    pub fn new(variance: f64, lengthscales: Vec<f64>, smoothness: Smoothness) -> Result<Self> {
        let p = MaternParams {
            variance,
            lengthscales,
            smoothness,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    pub fn validate(&self) -> Result<()> {
        // Zero variance is allowed: it switches a component off.
        if !(self.variance >= 0.0 && self.variance.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "variance".into(),
                value: self.variance,
            });
        }
        for (j, &rho) in self.lengthscales.iter().enumerate() {
            if !(rho > 0.0 && rho.is_finite()) {
                return Err(Error::InvalidParameter {
                    name: format!("lengthscale[{j}]"),
                    value: rho,
                });
            }
        }
        Ok(())
    }

    /// Scaled Euclidean distance `sqrt(sum_j (h_j / rho_j)^2)` of a lag
    /// given as `a - b`.
    #[inline]
    fn scaled_distance(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut acc = 0.0;
        for ((&ai, &bi), &rho) in a.iter().zip(b).zip(&self.lengthscales) {
            let u = (ai - bi) / rho;
            acc += u * u;
        }
        acc.sqrt()
    }

    #[inline]
    fn eval_pair(&self, a: &[f64], b: &[f64]) -> f64 {
        self.variance * self.smoothness.correlation(self.scaled_distance(a, b))
    }
}

/// Matérn covariance at lag `h`.
pub fn matern(h: &[f64], p: &MaternParams) -> Result<f64> {
    if h.len() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            found: h.len(),
        });
    }
    p.validate()?;
    if p.variance == 0.0 {
        return Err(Error::InvalidParameter {
            name: "variance".into(),
            value: 0.0,
        });
    }
    let zero = vec![0.0; h.len()];
    Ok(p.eval_pair(h, &zero))
}

/// Brownian-power correlation over the fidelity parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemporalCorrParams {
    pub exponent: f64,
    pub t_scale: f64,
}

impl TemporalCorrParams {
    pub fn new(exponent: f64, t_scale: f64) -> Result<Self> {
        let p = TemporalCorrParams { exponent, t_scale };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.exponent > 0.0 && self.exponent.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "exponent".into(),
                value: self.exponent,
            });
        }
        if !(self.t_scale > 0.0 && self.t_scale.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "t_scale".into(),
                value: self.t_scale,
            });
        }
        Ok(())
    }

    #[inline]
    fn eval_pair(&self, t: f64, t2: f64) -> f64 {
        (t.min(t2) / self.t_scale).powf(self.exponent)
    }
}

/// `(min(t, t2) / t_scale)^L`.
pub fn temporal_corr(t: f64, t2: f64, p: &TemporalCorrParams) -> Result<f64> {
    for v in [t, t2] {
        if !(v > 0.0) {
            return Err(Error::NonPositiveFidelity(v));
        }
    }
    p.validate()?;
    Ok(p.eval_pair(t, t2))
}

/// Which of the three model kinds a kernel belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ModelVariant {
    #[default]
    TwoScale,
    StationaryJoint,
    SingleLevel,
}

impl ModelVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelVariant::TwoScale => "two-scale",
            ModelVariant::StationaryJoint => "stationary-joint",
            ModelVariant::SingleLevel => "single-level",
        }
    }
}

impl std::str::FromStr for ModelVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two-scale" => Ok(ModelVariant::TwoScale),
            "stationary-joint" => Ok(ModelVariant::StationaryJoint),
            "single-level" => Ok(ModelVariant::SingleLevel),
            other => Err(Error::Config(format!("unknown model variant `{other}`"))),
        }
    }
}

/// Covariance of the latent mean `xi(x, t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case")]
pub enum KernelSpec {
    TwoScale {
        ideal: MaternParams,
        error: MaternParams,
        temporal: TemporalCorrParams,
    },
    StationaryJoint {
        /// Lengthscales over `(x_1, ..., x_d, t)`.
        joint: MaternParams,
    },
    SingleLevel {
        spatial: MaternParams,
    },
}

impl KernelSpec {
    pub fn variant(&self) -> ModelVariant {
        match self {
            KernelSpec::TwoScale { .. } => ModelVariant::TwoScale,
            KernelSpec::StationaryJoint { .. } => ModelVariant::StationaryJoint,
            KernelSpec::SingleLevel { .. } => ModelVariant::SingleLevel,
        }
    }

    /// Input dimension `d` (excluding the fidelity).
    pub fn input_dim(&self) -> usize {
        match self {
            KernelSpec::TwoScale { ideal, .. } => ideal.dim(),
            KernelSpec::StationaryJoint { joint } => joint.dim() - 1,
            KernelSpec::SingleLevel { spatial } => spatial.dim(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            KernelSpec::TwoScale {
                ideal,
                error,
                temporal,
            } => {
                ideal.validate()?;
                error.validate()?;
                temporal.validate()?;
                if ideal.dim() != error.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: ideal.dim(),
                        found: error.dim(),
                    });
                }
            }
            KernelSpec::StationaryJoint { joint } => {
                joint.validate()?;
                if joint.dim() < 2 {
                    return Err(Error::DimensionMismatch {
                        expected: 2,
                        found: joint.dim(),
                    });
                }
            }
            KernelSpec::SingleLevel { spatial } => spatial.validate()?,
        }
        Ok(())
    }

    /// Prior variance `k(s, s)` at fidelity `t`.
    pub fn prior_variance(&self, t: f64) -> f64 {
        match self {
            KernelSpec::TwoScale {
                ideal,
                error,
                temporal,
            } => ideal.variance + temporal.eval_pair(t, t) * error.variance,
            KernelSpec::StationaryJoint { joint } => joint.variance,
            KernelSpec::SingleLevel { spatial } => spatial.variance,
        }
    }

    /// Covariance without argument checks; callers guarantee dimensions and
    /// positive fidelities.
    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64], t: f64, x2: &[f64], t2: f64) -> f64 {
        match self {
            KernelSpec::TwoScale {
                ideal,
                error,
                temporal,
            } => {
                let mut k = ideal.eval_pair(x, x2);
                if error.variance > 0.0 {
                    k += temporal.eval_pair(t, t2) * error.eval_pair(x, x2);
                }
                k
            }
            KernelSpec::StationaryJoint { joint } => {
                let d = x.len();
                let r2 = {
                    let mut acc = 0.0;
                    for j in 0..d {
                        let u = (x[j] - x2[j]) / joint.lengthscales[j];
                        acc += u * u;
                    }
                    let u = (t - t2) / joint.lengthscales[d];
                    acc + u * u
                };
                joint.variance * joint.smoothness.correlation(r2.sqrt())
            }
            KernelSpec::SingleLevel { spatial } => spatial.eval_pair(x, x2),
        }
    }
}

/// Covariance between the points `a = (x, t)` and `b = (x', t')`.
pub fn kernel_eval(a: (&[f64], f64), b: (&[f64], f64), spec: &KernelSpec) -> Result<f64> {
    let d = spec.input_dim();
    for x in [a.0, b.0] {
        if x.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: x.len(),
            });
        }
    }
    if spec.variant() == ModelVariant::TwoScale {
        for t in [a.1, b.1] {
            if !(t > 0.0) {
                return Err(Error::NonPositiveFidelity(t));
            }
        }
    }
    Ok(spec.eval_unchecked(a.0, a.1, b.0, b.1))
}
