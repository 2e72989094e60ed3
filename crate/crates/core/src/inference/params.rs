use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::gp::NoiseModel;
use crate::kernels::{KernelSpec, MaternParams, ModelVariant, Smoothness, TemporalCorrParams};

use super::prior::LambdaPrior;

/// Bounds of the exponent of the fidelity correlation.
pub const EXPONENT_BOUNDS: (f64, f64) = (0.1, 4.0);

/// How free parameters are packed into a flat log-scale vector.
///
/// * two-scale: `ln s0, ln rho0[d], ln s_eps, ln rho_eps[d], ln L, ln lambda[p]`
/// * stationary-joint: `ln s, ln rho[d + 1], ln lambda[p]`
/// * single-level: `ln s, ln rho[d], ln lambda[p]`
///
/// `lambda` entries follow the order of `levels` (finest first).
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterLayout {
    pub variant: ModelVariant,
    pub dim: usize,
    pub smoothness: Smoothness,
    pub t_scale: f64,
    pub levels: Vec<f64>,
}

impl ParameterLayout {
    pub fn for_dataset(ds: &Dataset, variant: ModelVariant, smoothness: Smoothness) -> Self {
        let t_scale = ds.levels().last().map(|l| l.value).unwrap_or(1.0);
        ParameterLayout {
            variant,
            dim: ds.dim(),
            smoothness,
            t_scale,
            levels: ds.levels().iter().map(|l| l.value).collect(),
        }
    }

    fn kernel_len(&self) -> usize {
        match self.variant {
            ModelVariant::TwoScale => 2 * (1 + self.dim) + 1,
            ModelVariant::StationaryJoint => 1 + self.dim + 1,
            ModelVariant::SingleLevel => 1 + self.dim,
        }
    }

    pub fn len(&self) -> usize {
        self.kernel_len() + self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Slice of `theta` holding `ln lambda` per level.
    pub fn log_lambdas<'a>(&self, theta: &'a [f64]) -> &'a [f64] {
        &theta[self.kernel_len()..]
    }

    pub fn names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.len());
        let lengthscales = |names: &mut Vec<String>, part: &str, n: usize| {
            for j in 0..n {
                names.push(format!("ln_{part}lengthscale[{j}]"));
            }
        };
        match self.variant {
            ModelVariant::TwoScale => {
                names.push("ln_ideal_variance".into());
                lengthscales(&mut names, "ideal_", self.dim);
                names.push("ln_error_variance".into());
                lengthscales(&mut names, "error_", self.dim);
                names.push("ln_exponent".into());
            }
            ModelVariant::StationaryJoint => {
                names.push("ln_variance".into());
                lengthscales(&mut names, "", self.dim + 1);
            }
            ModelVariant::SingleLevel => {
                names.push("ln_variance".into());
                lengthscales(&mut names, "", self.dim);
            }
        }
        for t in &self.levels {
            names.push(format!("ln_lambda[{}]", crate::dataset::level_key(*t)));
        }
        names
    }

    fn matern(&self, v: &[f64]) -> MaternParams {
        MaternParams {
            variance: v[0].exp(),
            lengthscales: v[1..].iter().map(|x| x.exp()).collect(),
            smoothness: self.smoothness,
        }
    }

    /// Kernel and noise model encoded by `theta`.
    pub fn unpack(&self, theta: &[f64]) -> Result<(KernelSpec, NoiseModel)> {
        if theta.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: theta.len(),
            });
        }
        let d = self.dim;
        let kernel = match self.variant {
            ModelVariant::TwoScale => KernelSpec::TwoScale {
                ideal: self.matern(&theta[0..=d]),
                error: self.matern(&theta[d + 1..2 * d + 2]),
                temporal: TemporalCorrParams {
                    exponent: theta[2 * d + 2].exp(),
                    t_scale: self.t_scale,
                },
            },
            ModelVariant::StationaryJoint => KernelSpec::StationaryJoint {
                joint: self.matern(&theta[0..d + 2]),
            },
            ModelVariant::SingleLevel => KernelSpec::SingleLevel {
                spatial: self.matern(&theta[0..=d]),
            },
        };
        kernel.validate()?;
        let noise = NoiseModel::new(
            self.levels
                .iter()
                .copied()
                .zip(self.log_lambdas(theta).iter().copied()),
        )?;
        Ok((kernel, noise))
    }

    /// Inverse of [`unpack`](Self::unpack).
    pub fn pack(&self, kernel: &KernelSpec, noise: &NoiseModel) -> Result<Vec<f64>> {
        if kernel.variant() != self.variant || kernel.input_dim() != self.dim {
            return Err(Error::Config(format!(
                "kernel ({}, d = {}) does not match layout ({}, d = {})",
                kernel.variant().as_str(),
                kernel.input_dim(),
                self.variant.as_str(),
                self.dim
            )));
        }
        let push = |out: &mut Vec<f64>, m: &MaternParams| {
            out.push(m.variance.ln());
            out.extend(m.lengthscales.iter().map(|v| v.ln()));
        };
        let mut theta = Vec::with_capacity(self.len());
        match kernel {
            KernelSpec::TwoScale {
                ideal,
                error,
                temporal,
            } => {
                push(&mut theta, ideal);
                push(&mut theta, error);
                theta.push(temporal.exponent.ln());
            }
            KernelSpec::StationaryJoint { joint } => push(&mut theta, joint),
            KernelSpec::SingleLevel { spatial } => push(&mut theta, spatial),
        }
        for &t in &self.levels {
            theta.push(noise.log_variance(t).ok_or(Error::UnknownLevel(t))?);
        }
        Ok(theta)
    }

    /// Default log-scale search box.
    pub fn bounds(&self, ds: &Dataset, prior: &LambdaPrior) -> Result<Vec<(f64, f64)>> {
        self.make_box(ds, prior, false)
    }

    /// Central sub-box of [`bounds`](Self::bounds) that optimizer starts are
    /// drawn from.
    pub fn start_box(&self, ds: &Dataset, prior: &LambdaPrior) -> Result<Vec<(f64, f64)>> {
        self.make_box(ds, prior, true)
    }

    fn make_box(&self, ds: &Dataset, prior: &LambdaPrior, start: bool) -> Result<Vec<(f64, f64)>> {
        let n = ds.len() as f64;
        let z = ds.outputs();
        let mean = z.mean();
        let var_z = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        if !(var_z > 0.0) {
            return Err(Error::Unfittable("outputs have zero variance".into()));
        }
        let scaled = |lo: f64, hi: f64| ((lo * var_z).ln(), (hi * var_z).ln());
        let (variance, error_variance) = if start {
            (scaled(0.1, 1.0), scaled(0.05, 0.5))
        } else {
            (scaled(1e-6, 100.0), scaled(1e-6, 100.0))
        };
        let (ls_lo, ls_hi) = if start { (0.3, 3.0) } else { (0.01, 10.0) };
        let lengthscale = |range: f64| {
            let r = if range > 0.0 { range } else { 1.0 };
            ((ls_lo * r).ln(), (ls_hi * r).ln())
        };
        let x_ranges: Vec<(f64, f64)> = ds
            .input_bounds()
            .into_iter()
            .map(|(lo, hi)| lengthscale(hi - lo))
            .collect();
        let mut out = Vec::with_capacity(self.len());
        match self.variant {
            ModelVariant::TwoScale => {
                out.push(variance);
                out.extend(x_ranges.iter().copied());
                out.push(error_variance);
                out.extend(x_ranges.iter().copied());
                let exponent = if start { (0.5, 2.0) } else { EXPONENT_BOUNDS };
                out.push((exponent.0.ln(), exponent.1.ln()));
            }
            ModelVariant::StationaryJoint => {
                out.push(variance);
                out.extend(x_ranges.iter().copied());
                let first = ds.levels().first().map(|l| l.value).unwrap_or(1.0);
                let last = ds.levels().last().map(|l| l.value).unwrap_or(1.0);
                let t_range = if last > first { last - first } else { last };
                out.push(lengthscale(t_range));
            }
            ModelVariant::SingleLevel => {
                out.push(variance);
                out.extend(x_ranges.iter().copied());
            }
        }
        let half = if start { 1.0 } else { 3.0 } * prior.shared_variance.sqrt();
        for _ in &self.levels {
            out.push((prior.log_center - half, prior.log_center + half));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn layout(variant: ModelVariant) -> ParameterLayout {
        ParameterLayout {
            variant,
            dim: 3,
            smoothness: Smoothness::FiveHalves,
            t_scale: 100.0,
            levels: vec![25.0, 50.0, 100.0],
        }
    }

    #[test]
    fn lengths_and_names() {
        assert_eq!(layout(ModelVariant::TwoScale).len(), 2 * 4 + 1 + 3);
        assert_eq!(layout(ModelVariant::StationaryJoint).len(), 5 + 3);
        assert_eq!(layout(ModelVariant::SingleLevel).len(), 4 + 3);
        for v in [ModelVariant::TwoScale, ModelVariant::StationaryJoint, ModelVariant::SingleLevel] {
            let l = layout(v);
            assert_eq!(l.names().len(), l.len());
        }
        assert_eq!(layout(ModelVariant::SingleLevel).names()[4], "ln_lambda[25.000000]");
    }

    #[test]
    fn rejects_wrong_length() {
        let l = layout(ModelVariant::TwoScale);
        assert!(l.unpack(&[0.0; 3]).is_err());
    }

    proptest! {
        #[test]
        fn unpack_then_pack_is_identity(theta in proptest::collection::vec(-3.0f64..3.0, 12)) {
            for v in [ModelVariant::TwoScale, ModelVariant::StationaryJoint, ModelVariant::SingleLevel] {
                let l = layout(v);
                let th = &theta[..l.len()];
                let (k, noise) = l.unpack(th).unwrap();
                let back = l.pack(&k, &noise).unwrap();
                for (a, b) in th.iter().zip(&back) {
                    prop_assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }
}
