//! Gaussian-process posterior with heteroscedastic per-level noise and an
//! unknown constant mean integrated out under a flat prior.
//!
//! With `K_n = K + diag(lambda(t_i))`, `w = K_n^{-1} 1` and
//! `m = w^T Z / (1^T w)` (the generalized-least-squares mean), the posterior
//! of the latent mean at a site `s` with cross-covariance `k` is
//!
//! ```text
//! mean(s) = m + k^T K_n^{-1} (Z - m 1)
//! var(s)  = k(s, s) - k^T K_n^{-1} k + (1 - w^T k)^2 / (1^T w)
//! ```

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::dataset::{same_level, Dataset, Site};
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::linalg::{Cholesky, PivotMode};
use crate::rng::{stream_rng, Purpose};

/// Per-level observation variances `lambda(t)`, stored on the log scale.
/// A log-variance of `-inf` encodes a noiseless level.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NoiseModel {
    entries: Vec<(f64, f64)>,
}

impl NoiseModel {
    pub fn new(entries: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut model = NoiseModel::default();
        for (t, log_var) in entries {
            model.set(t, log_var)?;
        }
        Ok(model)
    }

    /// The same variance on every listed level.
    pub fn homoscedastic(levels: impl IntoIterator<Item = f64>, variance: f64) -> Result<Self> {
        NoiseModel::new(levels.into_iter().map(|t| (t, variance.ln())))
    }

    /// Inserts or replaces the log-variance of level `t`.
    pub fn set(&mut self, t: f64, log_variance: f64) -> Result<()> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::NonPositiveFidelity(t));
        }
        if log_variance.is_nan() || log_variance == f64::INFINITY {
            return Err(Error::InvalidParameter {
                name: format!("log_variance[{t}]"),
                value: log_variance,
            });
        }
        match self.entries.iter_mut().find(|(lt, _)| same_level(*lt, t)) {
            Some(entry) => entry.1 = log_variance,
            None => {
                self.entries.push((t, log_variance));
                self.entries.sort_by(|a, b| a.0.total_cmp(&b.0));
            }
        }
        Ok(())
    }

    pub fn log_variance(&self, t: f64) -> Option<f64> {
        self.entries
            .iter()
            .find(|(lt, _)| same_level(*lt, t))
            .map(|e| e.1)
    }

    pub fn variance(&self, t: f64) -> Option<f64> {
        self.log_variance(t).map(f64::exp)
    }

    /// `(level, ln lambda)` pairs sorted by level.
    pub fn entries(&self) -> &[(f64, f64)] {
        &self.entries
    }
}

fn noise_diagonal(ds: &Dataset, noise: &NoiseModel) -> Result<Vec<f64>> {
    ds.fidelities()
        .iter()
        .map(|&t| noise.variance(t).ok_or(Error::UnknownLevel(t)))
        .collect()
}

fn check_dims(ds: &Dataset, kernel: &KernelSpec) -> Result<()> {
    kernel.validate()?;
    if kernel.input_dim() != ds.dim() {
        return Err(Error::DimensionMismatch {
            expected: kernel.input_dim(),
            found: ds.dim(),
        });
    }
    Ok(())
}

/// Kernel matrix over the training sites (no noise).
pub fn kernel_matrix(ds: &Dataset, kernel: &KernelSpec) -> DMatrix<f64> {
    let n = ds.len();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| ds.input_row(i)).collect();
    let t = ds.fidelities();
    let mut k = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in j..n {
            let v = kernel.eval_unchecked(&rows[i], t[i], &rows[j], t[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Cross-covariance matrix `K(train, sites)` of shape `n x m`.
pub fn cross_covariance(ds: &Dataset, kernel: &KernelSpec, sites: &[Site]) -> DMatrix<f64> {
    let rows: Vec<Vec<f64>> = (0..ds.len()).map(|i| ds.input_row(i)).collect();
    let t = ds.fidelities();
    DMatrix::from_fn(ds.len(), sites.len(), |i, j| {
        kernel.eval_unchecked(&rows[i], t[i], &sites[j].x, sites[j].t)
    })
}

/// `K_n = K + diag(lambda(t_i))` before factorization.
pub fn gram_with_noise(ds: &Dataset, kernel: &KernelSpec, noise: &NoiseModel) -> Result<DMatrix<f64>> {
    check_dims(ds, kernel)?;
    let diag = noise_diagonal(ds, noise)?;
    let mut k = kernel_matrix(ds, kernel);
    for (i, v) in diag.into_iter().enumerate() {
        k[(i, i)] += v;
    }
    Ok(k)
}

pub(crate) fn describe(kernel: &KernelSpec, noise: &NoiseModel) -> String {
    let kernel = serde_json::to_string(kernel).unwrap_or_default();
    let noise: Vec<String> = noise
        .entries()
        .iter()
        .map(|(t, lv)| format!("lambda({t})={:.3e}", lv.exp()))
        .collect();
    format!("kernel {kernel}; {}", noise.join(", "))
}

/// Assembles and factors `K_n`, applying bounded jitter on failure.
pub fn assemble_gram(ds: &Dataset, kernel: &KernelSpec, noise: &NoiseModel) -> Result<Cholesky> {
    let k = gram_with_noise(ds, kernel, noise)?;
    Cholesky::with_jitter(k, PivotMode::Definite).map_err(|e| Error::IllConditioned {
        what: "Gram matrix",
        pivot: e.pivot,
        jitter: e.jitter,
        params: describe(kernel, noise),
    })
}

/// Generalized-least-squares estimate of the constant mean, and
/// `1^T K_n^{-1} 1`.
pub fn fit_gls_mean(outputs: &DVector<f64>, chol: &Cholesky) -> (f64, f64) {
    let ones = DVector::from_element(outputs.len(), 1.0);
    let u = chol.forward(&ones);
    let y = chol.forward(outputs);
    let denominator = u.norm_squared();
    (u.dot(&y) / denominator, denominator)
}

/// Posterior mean and variances at a batch of sites.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionResult {
    pub mean: Vec<f64>,
    pub variance_latent: Vec<f64>,
    /// Latent variance plus `lambda(t*)`, when requested.
    pub variance_observation: Option<Vec<f64>>,
}

/// Leave-one-out posterior at one training row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LooEntry {
    pub mean: f64,
    pub variance_latent: f64,
    /// `variance_latent + lambda(t_i)`.
    pub variance_observation: f64,
    /// `(z_i - mean) / sqrt(variance_observation)`.
    pub residual: f64,
}

/// A fitted model: data, hyperparameters and cached factorization.
#[derive(Debug, Clone)]
pub struct FittedModel {
    dataset: Dataset,
    kernel: KernelSpec,
    noise: NoiseModel,
    chol: Cholesky,
    /// `K_n^{-1} 1`
    kinv_ones: DVector<f64>,
    /// `K_n^{-1} (Z - m 1)`
    alpha: DVector<f64>,
    gls_mean: f64,
    gls_denominator: f64,
}

impl FittedModel {
    pub fn new(dataset: Dataset, kernel: KernelSpec, noise: NoiseModel) -> Result<Self> {
        let chol = assemble_gram(&dataset, &kernel, &noise)?;
        let (gls_mean, gls_denominator) = fit_gls_mean(dataset.outputs(), &chol);
        if !(gls_denominator > 0.0 && gls_denominator.is_finite() && gls_mean.is_finite()) {
            return Err(Error::IllConditioned {
                what: "GLS mean",
                pivot: 0,
                jitter: chol.jitter(),
                params: describe(&kernel, &noise),
            });
        }
        let n = dataset.len();
        let kinv_ones = chol.solve(&DVector::from_element(n, 1.0));
        let centered = dataset.outputs().add_scalar(-gls_mean);
        let alpha = chol.solve(&centered);
        Ok(FittedModel {
            dataset,
            kernel,
            noise,
            chol,
            kinv_ones,
            alpha,
            gls_mean,
            gls_denominator,
        })
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn cholesky(&self) -> &Cholesky {
        &self.chol
    }

    pub fn gls_mean(&self) -> f64 {
        self.gls_mean
    }

    pub fn gls_denominator(&self) -> f64 {
        self.gls_denominator
    }

    /// Same fit with an extra (or replaced) noise level; the factorization is
    /// unchanged when the level carries no training data.
    pub fn with_noise_level(&self, t: f64, log_variance: f64) -> Result<Self> {
        let mut noise = self.noise.clone();
        noise.set(t, log_variance)?;
        if self.dataset.level_index(t).is_some() {
            return FittedModel::new(self.dataset.clone(), self.kernel.clone(), noise);
        }
        let mut model = self.clone();
        model.noise = noise;
        Ok(model)
    }

    fn check_sites(&self, sites: &[Site]) -> Result<()> {
        let d = self.dataset.dim();
        for s in sites {
            if s.x.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: s.x.len(),
                });
            }
            if !(s.t > 0.0) {
                return Err(Error::NonPositiveFidelity(s.t));
            }
        }
        Ok(())
    }

    /// Posterior mean, `V = L^{-1} K(train, sites)` and `u = 1 - w^T k`.
    fn posterior_parts(&self, sites: &[Site]) -> (Vec<f64>, DMatrix<f64>, Vec<f64>) {
        let kx = cross_covariance(&self.dataset, &self.kernel, sites);
        let mean = kx
            .column_iter()
            .map(|k| self.gls_mean + k.dot(&self.alpha))
            .collect();
        let u = kx
            .column_iter()
            .map(|k| 1.0 - k.dot(&self.kinv_ones))
            .collect();
        let v = self.chol.forward_mat(&kx);
        (mean, v, u)
    }

    /// Posterior of the latent mean at `sites`.
    pub fn predict(&self, sites: &[Site]) -> Result<PredictionResult> {
        self.check_sites(sites)?;
        let (mean, v, u) = self.posterior_parts(sites);
        let mut variance_latent = Vec::with_capacity(sites.len());
        for (j, s) in sites.iter().enumerate() {
            let prior = self.kernel.prior_variance(s.t);
            let var = prior - v.column(j).norm_squared() + u[j] * u[j] / self.gls_denominator;
            variance_latent.push(clamp_variance(var, prior, j)?);
        }
        Ok(PredictionResult {
            mean,
            variance_latent,
            variance_observation: None,
        })
    }

    /// Like [`predict`](Self::predict) but also returns the variance of a
    /// new noisy observation.
    pub fn predict_noisy(&self, sites: &[Site]) -> Result<PredictionResult> {
        let lambdas: Vec<f64> = sites
            .iter()
            .map(|s| self.noise.variance(s.t).ok_or(Error::UnknownLevel(s.t)))
            .collect::<Result<_>>()?;
        let mut out = self.predict(sites)?;
        out.variance_observation = Some(
            out.variance_latent
                .iter()
                .zip(&lambdas)
                .map(|(v, l)| v + l)
                .collect(),
        );
        Ok(out)
    }

    /// Closed-form leave-one-out predictions under the fixed hyperparameters.
    ///
    /// Uses the projected precision `P = K_n^{-1} - w w^T / (1^T w)`: the
    /// left-out observation has predictive variance `1 / P_ii` and mean
    /// `z_i - (P Z)_i / P_ii`, with `P Z = K_n^{-1}(Z - m 1)`.
    pub fn loo(&self) -> Result<Vec<LooEntry>> {
        let n = self.dataset.len();
        if n < 3 {
            return Err(Error::NotEnoughPoints { needed: 3, found: n });
        }
        let kinv = self.chol.inverse();
        let z = self.dataset.outputs();
        (0..n)
            .map(|i| {
                let w = self.kinv_ones[i];
                let p_ii = kinv[(i, i)] - w * w / self.gls_denominator;
                let variance_observation = 1.0 / p_ii;
                let mean = z[i] - self.alpha[i] * variance_observation;
                let t = self.dataset.fidelities()[i];
                let lambda = self.noise.variance(t).ok_or(Error::UnknownLevel(t))?;
                let latent = variance_observation - lambda - self.chol.jitter();
                let variance_latent =
                    clamp_variance(latent, self.kernel.prior_variance(t), i)?;
                Ok(LooEntry {
                    mean,
                    variance_latent,
                    variance_observation,
                    residual: (z[i] - mean) / variance_observation.sqrt(),
                })
            })
            .collect()
    }

    /// Joint posterior covariance of the latent mean at `sites`; lower
    /// triangle only.
    fn posterior_covariance_lower(&self, sites: &[Site], v: &DMatrix<f64>, u: &[f64]) -> DMatrix<f64> {
        let m = sites.len();
        let mut c = DMatrix::zeros(m, m);
        for j in 0..m {
            for i in j..m {
                c[(i, j)] = self
                    .kernel
                    .eval_unchecked(&sites[i].x, sites[i].t, &sites[j].x, sites[j].t);
            }
        }
        const BLOCK: usize = 128;
        let vt = v.transpose();
        let mut j = 0;
        while j < m {
            let w = BLOCK.min(m - j);
            let lhs = vt.rows(j, m - j);
            let rhs = v.columns(j, w);
            c.view_mut((j, j), (m - j, w)).gemm(-1.0, &lhs, &rhs, 1.0);
            j += w;
        }
        let inv_den = 1.0 / self.gls_denominator;
        for j in 0..m {
            for i in j..m {
                c[(i, j)] += u[i] * u[j] * inv_den;
            }
        }
        c
    }

    /// Joint posterior mean and a factor `L` of the posterior covariance.
    pub fn posterior_factor(&self, sites: &[Site]) -> Result<(Vec<f64>, Cholesky)> {
        self.check_sites(sites)?;
        let (mean, v, u) = self.posterior_parts(sites);
        let c = self.posterior_covariance_lower(sites, &v, &u);
        let scale = sites
            .iter()
            .map(|s| self.kernel.prior_variance(s.t))
            .sum::<f64>()
            / sites.len().max(1) as f64;
        let mode = PivotMode::Semidefinite {
            zero_tol: 1e-12 * scale,
            neg_tol: 1e-8 * scale,
        };
        let chol = Cholesky::with_jitter(c, mode).map_err(|e| Error::IllConditioned {
            what: "posterior covariance",
            pivot: e.pivot,
            jitter: e.jitter,
            params: describe(&self.kernel, &self.noise),
        })?;
        Ok((mean, chol))
    }

    /// Dense posterior covariance at `sites` (full symmetric matrix).
    pub fn posterior_covariance(&self, sites: &[Site]) -> Result<DMatrix<f64>> {
        self.check_sites(sites)?;
        let (_, v, u) = self.posterior_parts(sites);
        let mut c = self.posterior_covariance_lower(sites, &v, &u);
        for j in 0..c.ncols() {
            for i in 0..j {
                c[(i, j)] = c[(j, i)];
            }
        }
        Ok(c)
    }

    /// `n_sim` joint posterior draws of the latent mean at `sites`, one row
    /// per draw.  Draw `s` uses random stream `s` of `seed`.
    pub fn conditional_simulate(&self, sites: &[Site], n_sim: usize, seed: u64) -> Result<DMatrix<f64>> {
        let streams: Vec<u64> = (0..n_sim as u64).collect();
        self.conditional_simulate_streams(sites, seed, &streams)
    }

    /// Posterior draws for explicit replicate stream indices.
    pub fn conditional_simulate_streams(
        &self,
        sites: &[Site],
        seed: u64,
        streams: &[u64],
    ) -> Result<DMatrix<f64>> {
        if sites.is_empty() || streams.is_empty() {
            return Err(Error::NotEnoughPoints { needed: 1, found: 0 });
        }
        let (mean, chol) = self.posterior_factor(sites)?;
        let m = sites.len();
        let mut normals = DMatrix::zeros(m, streams.len());
        for (col, &s) in streams.iter().enumerate() {
            let mut rng = stream_rng(seed, Purpose::Posterior, s);
            for i in 0..m {
                normals[(i, col)] = StandardNormal.sample(&mut rng);
            }
        }
        let draws = chol.l() * normals;
        Ok(DMatrix::from_fn(streams.len(), m, |s, j| mean[j] + draws[(j, s)]))
    }
}

fn clamp_variance(var: f64, prior: f64, index: usize) -> Result<f64> {
    if var >= 0.0 {
        Ok(var)
    } else if var >= -1e-9 * prior.max(1.0) {
        Ok(0.0)
    } else {
        Err(Error::NegativeVariance { index, value: var })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{MaternParams, Smoothness, TemporalCorrParams};

    fn single(var: f64, rho: f64, nu: Smoothness) -> KernelSpec {
        KernelSpec::SingleLevel {
            spatial: MaternParams::new(var, vec![rho], nu).unwrap(),
        }
    }

    #[test]
    fn gram_entries_match_hand_evaluation() {
        let ds = Dataset::from_rows(&[
            (vec![0.0], 1.0, 0.3),
            (vec![0.5], 1.0, -0.2),
            (vec![2.0], 1.0, 1.1),
        ])
        .unwrap();
        let k = single(2.0, 0.5, Smoothness::Half);
        let noise = NoiseModel::homoscedastic([1.0], 0.1).unwrap();
        let g = gram_with_noise(&ds, &k, &noise).unwrap();
        let x = [0.0, 0.5, 2.0];
        for i in 0..3 {
            for j in 0..3 {
                let mut e = 2.0 * (-(x[i] - x[j] as f64).abs() / 0.5).exp();
                if i == j {
                    e += 0.1;
                }
                assert!((g[(i, j)] - e).abs() < 1e-12);
            }
        }
        let chol = assemble_gram(&ds, &k, &noise).unwrap();
        assert!((chol.l() * chol.l().transpose() - g).norm() < 1e-12);
    }

    #[test]
    fn homoscedastic_noise_adds_identity() {
        let ds = Dataset::from_rows(&[
            (vec![0.0, 0.1], 50.0, 0.3),
            (vec![0.5, 0.3], 100.0, -0.2),
            (vec![0.9, 0.8], 50.0, 1.1),
        ])
        .unwrap();
        let k = KernelSpec::TwoScale {
            ideal: MaternParams::new(1.0, vec![0.3, 0.3], Smoothness::FiveHalves).unwrap(),
            error: MaternParams::new(0.5, vec![0.3, 0.3], Smoothness::FiveHalves).unwrap(),
            temporal: TemporalCorrParams::new(1.2, 100.0).unwrap(),
        };
        let noise = NoiseModel::homoscedastic([50.0, 100.0], 0.25).unwrap();
        let g = gram_with_noise(&ds, &k, &noise).unwrap();
        let bare = kernel_matrix(&ds, &k);
        assert!((g - bare - DMatrix::identity(3, 3) * 0.25).amax() < 1e-15);
    }

    #[test]
    fn duplicate_noiseless_points_get_jitter() {
        let ds = Dataset::from_rows(&[(vec![0.2], 10.0, 1.0), (vec![0.2], 10.0, 1.0)]).unwrap();
        let k = KernelSpec::TwoScale {
            ideal: MaternParams::new(1.0, vec![0.3], Smoothness::FiveHalves).unwrap(),
            error: MaternParams::new(1.0, vec![0.3], Smoothness::FiveHalves).unwrap(),
            temporal: TemporalCorrParams::new(1.0, 10.0).unwrap(),
        };
        let noise = NoiseModel::new([(10.0, f64::NEG_INFINITY)]).unwrap();
        let g = gram_with_noise(&ds, &k, &noise).unwrap();
        assert!((g[(0, 0)] - 2.0).abs() < 1e-15 && g.iter().all(|&v| v == g[(0, 0)]));
        let chol = assemble_gram(&ds, &k, &noise).unwrap();
        assert!(chol.jitter() > 0.0);
    }

    #[test]
    fn missing_level_is_reported() {
        let ds = Dataset::from_rows(&[(vec![0.0], 1.0, 0.0), (vec![1.0], 2.0, 1.0)]).unwrap();
        let noise = NoiseModel::homoscedastic([1.0], 0.1).unwrap();
        let k = single(1.0, 1.0, Smoothness::Half);
        assert!(matches!(
            assemble_gram(&ds, &k, &noise),
            Err(Error::UnknownLevel(t)) if t == 2.0
        ));
    }

    #[test]
    fn gls_mean_cases() {
        let chol = Cholesky::with_jitter(DMatrix::identity(4, 4), PivotMode::Definite).unwrap();
        let z = DVector::from_vec(vec![1.0, 2.0, 4.0, 9.0]);
        let (m, den) = fit_gls_mean(&z, &chol);
        assert!((m - 4.0).abs() < 1e-15 && (den - 4.0).abs() < 1e-15);

        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let chol = Cholesky::with_jitter(a, PivotMode::Definite).unwrap();
        let (m, den) = fit_gls_mean(&DVector::from_vec(vec![0.0, 1.0]), &chol);
        assert!((m - 0.5).abs() < 1e-15);
        // 1^T K^{-1} 1 = 2 / 1.5 for this matrix.
        assert!((den - 4.0 / 3.0).abs() < 1e-15);
        let (m, _) = fit_gls_mean(&DVector::from_vec(vec![-3.5, -3.5]), &chol);
        assert!((m + 3.5).abs() < 1e-15);
    }

    #[test]
    fn far_away_prediction_tends_to_gls_prior() {
        // Two observations; far from the data k -> 0 so the mean tends to the
        // GLS mean and the variance to sigma^2 + 1 / (1^T K^-1 1).
        let (var, lambda) = (2.0, 0.3);
        let ds = Dataset::from_rows(&[(vec![0.0], 1.0, 1.0), (vec![0.4], 1.0, 3.0)]).unwrap();
        let k = single(var, 0.5, Smoothness::FiveHalves);
        let model = FittedModel::new(ds, k.clone(), NoiseModel::homoscedastic([1.0], lambda).unwrap())
            .unwrap();
        // Hand 2x2 inverse.
        let k12 = crate::kernels::matern(&[0.4], match &k {
            KernelSpec::SingleLevel { spatial } => spatial,
            _ => unreachable!(),
        })
        .unwrap();
        let a = var + lambda;
        let det = a * a - k12 * k12;
        let den = 2.0 * (a - k12) / det;
        let gls = (a - k12) / det * (1.0 + 3.0) / den;
        assert!((model.gls_mean() - gls).abs() < 1e-12);
        assert!((model.gls_denominator() - den).abs() < 1e-12);
        let p = model.predict(&[Site::new(vec![1e3], 1.0)]).unwrap();
        assert!((p.mean[0] - gls).abs() < 1e-12);
        assert!((p.variance_latent[0] - (var + 1.0 / den)).abs() < 1e-12);
    }

    #[test]
    fn interpolates_noiseless_data() {
        let rows: Vec<_> = (0..8)
            .map(|i| {
                let x = i as f64 / 7.0;
                (vec![x], 1.0, (6.0 * x).sin() + 10.0)
            })
            .collect();
        let ds = Dataset::from_rows(&rows).unwrap();
        let noise = NoiseModel::new([(1.0, f64::NEG_INFINITY)]).unwrap();
        let model = FittedModel::new(ds.clone(), single(1.0, 0.3, Smoothness::FiveHalves), noise).unwrap();
        let p = model.predict(&ds.sites()).unwrap();
        for i in 0..ds.len() {
            assert!((p.mean[i] - ds.outputs()[i]).abs() < 1e-8);
            assert!(p.variance_latent[i].abs() < 1e-8);
        }
    }

    #[test]
    fn predict_noisy_needs_level() {
        let ds = Dataset::from_rows(&[(vec![0.0], 50.0, 1.0), (vec![0.4], 50.0, 3.0)]).unwrap();
        let k = single(1.0, 0.5, Smoothness::FiveHalves);
        let model = FittedModel::new(ds, k, NoiseModel::homoscedastic([50.0], 0.1).unwrap()).unwrap();
        let site = [Site::new(vec![0.2], 20.0)];
        assert!(matches!(model.predict_noisy(&site), Err(Error::UnknownLevel(_))));
        let model = model.with_noise_level(20.0, 0.5f64.ln()).unwrap();
        let p = model.predict_noisy(&site).unwrap();
        let obs = p.variance_observation.unwrap();
        assert!((obs[0] - p.variance_latent[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn loo_three_replicates_at_one_site() {
        // Three noisy observations at one site: leaving one out gives the
        // mean of the other two, latent variance lambda / 2.
        let (var, lambda) = (1.7, 0.4);
        let z = [1.0, 2.0, 4.5];
        let ds = Dataset::from_rows(&[
            (vec![0.3], 1.0, z[0]),
            (vec![0.3], 1.0, z[1]),
            (vec![0.3], 1.0, z[2]),
        ])
        .unwrap();
        let model = FittedModel::new(
            ds,
            single(var, 0.2, Smoothness::ThreeHalves),
            NoiseModel::homoscedastic([1.0], lambda).unwrap(),
        )
        .unwrap();
        let loo = model.loo().unwrap();
        for i in 0..3 {
            let others: f64 = (0..3).filter(|&k| k != i).map(|k| z[k]).sum::<f64>() / 2.0;
            assert!((loo[i].mean - others).abs() < 1e-10);
            assert!((loo[i].variance_latent - lambda / 2.0).abs() < 1e-10);
            let delta = (z[i] - others) / (1.5 * lambda).sqrt();
            assert!((loo[i].residual - delta).abs() < 1e-9);
        }
    }

    #[test]
    fn loo_needs_three_points() {
        let ds = Dataset::from_rows(&[(vec![0.0], 1.0, 1.0), (vec![0.4], 1.0, 3.0)]).unwrap();
        let model = FittedModel::new(
            ds,
            single(1.0, 0.5, Smoothness::FiveHalves),
            NoiseModel::homoscedastic([1.0], 0.1).unwrap(),
        )
        .unwrap();
        assert!(matches!(model.loo(), Err(Error::NotEnoughPoints { .. })));
    }

    #[test]
    fn loo_constant_data_has_zero_residuals() {
        let rows: Vec<_> = (0..6).map(|i| (vec![i as f64 * 0.2], 1.0 + (i % 2) as f64, 7.25)).collect();
        let ds = Dataset::from_rows(&rows).unwrap();
        let k = KernelSpec::StationaryJoint {
            joint: MaternParams::new(1.0, vec![0.4, 1.0], Smoothness::FiveHalves).unwrap(),
        };
        let noise = NoiseModel::new([(1.0, -2.0), (2.0, -1.0)]).unwrap();
        let model = FittedModel::new(ds, k, noise).unwrap();
        for e in model.loo().unwrap() {
            assert!(e.residual.abs() < 1e-10);
        }
    }

    #[test]
    fn simulation_at_noiseless_sites_reproduces_data() {
        let rows: Vec<_> = (0..6).map(|i| (vec![i as f64 / 5.0], 1.0, (i as f64).sqrt())).collect();
        let ds = Dataset::from_rows(&rows).unwrap();
        let noise = NoiseModel::new([(1.0, f64::NEG_INFINITY)]).unwrap();
        let model = FittedModel::new(ds.clone(), single(1.0, 0.3, Smoothness::FiveHalves), noise).unwrap();
        let mut sites = ds.sites();
        sites.extend(ds.sites());
        let draws = model.conditional_simulate(&sites, 50, 9).unwrap();
        for s in 0..50 {
            for j in 0..sites.len() {
                assert!((draws[(s, j)] - ds.outputs()[j % 6]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn simulation_streams_are_permutable() {
        let rows: Vec<_> = (0..5).map(|i| (vec![i as f64 / 4.0], 1.0, (i as f64).cos())).collect();
        let ds = Dataset::from_rows(&rows).unwrap();
        let model = FittedModel::new(
            ds,
            single(1.0, 0.3, Smoothness::FiveHalves),
            NoiseModel::homoscedastic([1.0], 0.01).unwrap(),
        )
        .unwrap();
        let sites: Vec<Site> = (0..7).map(|i| Site::new(vec![i as f64 / 6.0 + 0.01], 1.0)).collect();
        let a = model.conditional_simulate_streams(&sites, 3, &[0, 1, 2]).unwrap();
        let b = model.conditional_simulate_streams(&sites, 3, &[2, 0, 1]).unwrap();
        assert_eq!(a.row(2), b.row(0));
        assert_eq!(a.row(0), b.row(1));
        assert_eq!(a.row(1), b.row(2));
        assert_eq!(a, model.conditional_simulate(&sites, 3, 3).unwrap());
    }
}
