//! MAP estimation of kernel hyperparameters and per-level noise variances.
//!
//! The objective is the restricted log-likelihood of the outputs, i.e. the
//! marginal likelihood with the constant mean integrated out under a flat
//! prior,
//!
//! ```text
//! -1/2 (Z - m 1)^T K_n^{-1} (Z - m 1) - 1/2 ln|K_n| - 1/2 ln(1^T K_n^{-1} 1)
//!     - (n - 1)/2 ln(2 pi)
//! ```
//!
//! plus the weighted log-density of the exchangeable log-normal prior on the
//! noise variances.  Other parameters carry flat priors on the log scale.

mod optimizer;
mod params;
mod prior;

pub use optimizer::{nelder_mead, LocalResult, NelderMeadOptions};
pub use params::{ParameterLayout, EXPONENT_BOUNDS};
pub use prior::{default_shared_variance, default_within_variance, lambda_log_prior, LambdaPrior};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::designs::lhs_with_rng;
use crate::error::{Error, Result};
use crate::gp::{assemble_gram, FittedModel, NoiseModel};
use crate::kernels::{KernelSpec, ModelVariant, Smoothness};
use crate::linalg::{Cholesky, PivotMode};
use crate::rng::{stream_rng, Purpose};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Restricted log-likelihood from a factored `K_n`.
fn restricted_from_factor(outputs: &DVector<f64>, chol: &Cholesky) -> f64 {
    let n = outputs.len();
    let u = chol.forward(&DVector::from_element(n, 1.0));
    let y = chol.forward(outputs);
    let den = u.norm_squared();
    let uy = u.dot(&y);
    let quad = y.norm_squared() - uy * uy / den;
    -0.5 * (quad + chol.log_det() + den.ln() + (n as f64 - 1.0) * LN_2PI)
}

/// Restricted (mean-integrated) log-likelihood of the outputs.
pub fn restricted_log_likelihood(ds: &Dataset, kernel: &KernelSpec, noise: &NoiseModel) -> Result<f64> {
    let chol = assemble_gram(ds, kernel, noise)?;
    Ok(restricted_from_factor(ds.outputs(), &chol))
}

/// Objective evaluator with per-pair distances cached across evaluations.
pub struct Objective<'a> {
    ds: &'a Dataset,
    layout: &'a ParameterLayout,
    prior: &'a LambdaPrior,
    /// Squared coordinate differences, `d` per pair `(i > j)`, column-major
    /// pair order.
    diff2: Vec<f64>,
    /// `ln(min(t_i, t_j) / t_scale)` per pair.
    log_tmin: Vec<f64>,
    /// `(t_i - t_j)^2` per pair.
    dt2: Vec<f64>,
    /// Level index of each row.
    row_level: Vec<usize>,
}

impl<'a> Objective<'a> {
    pub fn new(ds: &'a Dataset, layout: &'a ParameterLayout, prior: &'a LambdaPrior) -> Result<Self> {
        if layout.dim != ds.dim() {
            return Err(Error::DimensionMismatch {
                expected: layout.dim,
                found: ds.dim(),
            });
        }
        if prior.len() != layout.levels.len() {
            return Err(Error::DimensionMismatch {
                expected: layout.levels.len(),
                found: prior.len(),
            });
        }
        let n = ds.len();
        let d = ds.dim();
        let x = ds.inputs();
        let t = ds.fidelities();
        let pairs = n * (n - 1) / 2;
        let mut diff2 = Vec::with_capacity(pairs * d);
        let mut log_tmin = Vec::with_capacity(pairs);
        let mut dt2 = Vec::with_capacity(pairs);
        for j in 0..n {
            for i in j + 1..n {
                for k in 0..d {
                    diff2.push((x[(i, k)] - x[(j, k)]).powi(2));
                }
                log_tmin.push((t[i].min(t[j]) / layout.t_scale).ln());
                dt2.push((t[i] - t[j]).powi(2));
            }
        }
        let row_level = t
            .iter()
            .map(|&ti| {
                layout
                    .levels
                    .iter()
                    .position(|&l| crate::dataset::same_level(l, ti))
                    .ok_or(Error::UnknownLevel(ti))
            })
            .collect::<Result<_>>()?;
        Ok(Objective {
            ds,
            layout,
            prior,
            diff2,
            log_tmin,
            dt2,
            row_level,
        })
    }

    fn gram(&self, theta: &[f64]) -> DMatrix<f64> {
        let n = self.ds.len();
        let d = self.layout.dim;
        let nu = self.layout.smoothness;
        let inv2 = |v: &[f64]| -> Vec<f64> { v.iter().map(|l| (-2.0 * l).exp()).collect() };
        let lambdas: Vec<f64> = self.layout.log_lambdas(theta).iter().map(|v| v.exp()).collect();
        let mut k = DMatrix::zeros(n, n);
        let t = self.ds.fidelities();

        match self.layout.variant {
            ModelVariant::TwoScale => {
                let (s0, w0) = (theta[0].exp(), inv2(&theta[1..=d]));
                let (se, we) = (theta[d + 1].exp(), inv2(&theta[d + 2..2 * d + 2]));
                let exponent = theta[2 * d + 2].exp();
                let mut p = 0;
                for j in 0..n {
                    for i in j + 1..n {
                        let dd = &self.diff2[p * d..(p + 1) * d];
                        let (mut r0, mut re) = (0.0, 0.0);
                        for q in 0..d {
                            r0 += dd[q] * w0[q];
                            re += dd[q] * we[q];
                        }
                        let temporal = (exponent * self.log_tmin[p]).exp();
                        k[(i, j)] = s0 * nu.correlation(r0.sqrt()) + se * temporal * nu.correlation(re.sqrt());
                        p += 1;
                    }
                    let temporal = (t[j] / self.layout.t_scale).powf(exponent);
                    k[(j, j)] = s0 + se * temporal + lambdas[self.row_level[j]];
                }
            }
            ModelVariant::StationaryJoint | ModelVariant::SingleLevel => {
                let joint = self.layout.variant == ModelVariant::StationaryJoint;
                let s = theta[0].exp();
                let w = inv2(&theta[1..=d]);
                let wt = if joint { (-2.0 * theta[d + 1]).exp() } else { 0.0 };
                let mut p = 0;
                for j in 0..n {
                    for i in j + 1..n {
                        let dd = &self.diff2[p * d..(p + 1) * d];
                        let mut r = self.dt2[p] * wt;
                        for q in 0..d {
                            r += dd[q] * w[q];
                        }
                        k[(i, j)] = s * nu.correlation(r.sqrt());
                        p += 1;
                    }
                    k[(j, j)] = s + lambdas[self.row_level[j]];
                }
            }
        }
        k
    }

    /// MAP objective at `theta`; `-inf` when `K_n` cannot be factored.
    pub fn value(&self, theta: &[f64]) -> f64 {
        if theta.len() != self.layout.len() || theta.iter().any(|v| !v.is_finite()) {
            return f64::NEG_INFINITY;
        }
        let k = self.gram(theta);
        let Ok(chol) = Cholesky::with_jitter(k, PivotMode::Definite) else {
            return f64::NEG_INFINITY;
        };
        let ll = restricted_from_factor(self.ds.outputs(), &chol);
        let lp = self.prior.log_density_unchecked(self.layout.log_lambdas(theta));
        let v = ll + self.prior.weight * lp;
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    }
}

/// MAP objective (restricted log-likelihood plus weighted noise prior).
pub fn map_objective(theta: &[f64], ds: &Dataset, layout: &ParameterLayout, prior: &LambdaPrior) -> f64 {
    match Objective::new(ds, layout, prior) {
        Ok(obj) => obj.value(theta),
        Err(_) => f64::NEG_INFINITY,
    }
}

/// Multi-start settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSettings {
    pub starts: usize,
    /// Evaluation budget of each local search from a start.
    pub max_evals: usize,
    /// Number of best starts that are polished further.
    pub refine: usize,
    /// Budget for the restarts from each refined start.
    pub polish_evals: usize,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        OptimizerSettings {
            starts: 10,
            max_evals: 1500,
            refine: 3,
            polish_evals: 5000,
        }
    }
}

/// Constants of the noise-variance prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PriorSettings {
    /// Prior noise standard deviation as a fraction of the output range.
    pub range_fraction: f64,
    pub within_variance: f64,
    pub shared_variance: f64,
    pub weight: f64,
}

impl Default for PriorSettings {
    fn default() -> Self {
        PriorSettings {
            range_fraction: 0.01,
            within_variance: default_within_variance(),
            shared_variance: default_shared_variance(),
            weight: 1.0,
        }
    }
}

impl PriorSettings {
    pub fn build(&self, ds: &Dataset) -> Result<LambdaPrior> {
        let mut prior = LambdaPrior::for_dataset(ds, self.range_fraction)?;
        prior.within_variance = self.within_variance;
        prior.shared_variance = self.shared_variance;
        prior.weight = self.weight;
        prior.validate()?;
        Ok(prior)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    pub smoothness: Smoothness,
    pub optimizer: OptimizerSettings,
    pub prior: PriorSettings,
    /// Levels without data that need a noise variance (e.g. the target
    /// fidelity for observation-variance predictions).
    pub prediction_levels: Vec<f64>,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            smoothness: Smoothness::FiveHalves,
            optimizer: OptimizerSettings::default(),
            prior: PriorSettings::default(),
            prediction_levels: Vec::new(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartReport {
    pub index: usize,
    pub start_objective: f64,
    pub final_objective: f64,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolishReport {
    pub start: usize,
    pub rounds: usize,
    pub evaluations: usize,
    pub final_objective: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationReport {
    pub starts: Vec<StartReport>,
    pub polished: Vec<PolishReport>,
    pub best_start: usize,
    pub total_evaluations: usize,
    pub final_objective: f64,
}

/// Outcome of [`map_fit`].
#[derive(Debug, Clone)]
pub struct MapFit {
    pub model: FittedModel,
    pub theta: Vec<f64>,
    pub layout: ParameterLayout,
    pub prior: LambdaPrior,
    pub objective: f64,
    pub report: OptimizationReport,
}

/// Restarts Nelder–Mead from `incumbent` with a small simplex until a
/// restart converges without improving, or the budget runs out.
fn polish<F>(mut cost: F, mut incumbent: LocalResult, bounds: &[(f64, f64)], budget: usize) -> (LocalResult, PolishReport)
where
    F: FnMut(&[f64]) -> f64,
{
    let (mut evaluations, mut rounds, mut converged) = (0, 0, false);
    while evaluations < budget {
        let opts = NelderMeadOptions {
            max_evals: budget - evaluations,
            initial_step: 0.02,
            ..Default::default()
        };
        let r = nelder_mead(&mut cost, &incumbent.x, bounds, &opts);
        evaluations += r.evals;
        rounds += 1;
        let gain = incumbent.f - r.f;
        if r.f < incumbent.f {
            incumbent = r.clone();
        }
        if r.converged && gain <= 1e-6 {
            converged = true;
            break;
        }
    }
    let report = PolishReport {
        start: 0,
        rounds,
        evaluations,
        final_objective: -incumbent.f,
        converged,
    };
    (incumbent, report)
}

/// MAP fit: multi-start bounded Nelder–Mead on the log-scale box; the best
/// few local optima are then polished by restarts.
pub fn map_fit(ds: &Dataset, variant: ModelVariant, config: &FitConfig) -> Result<MapFit> {
    if variant == ModelVariant::SingleLevel && ds.levels().len() != 1 {
        return Err(Error::Config(format!(
            "the single-level model needs data on exactly one level, found {}",
            ds.levels().len()
        )));
    }
    if config.optimizer.starts == 0 {
        return Err(Error::Config("at least one optimizer start is required".into()));
    }
    let prior = config.prior.build(ds)?;
    let layout = ParameterLayout::for_dataset(ds, variant, config.smoothness);
    let bounds = layout.bounds(ds, &prior)?;
    let objective = Objective::new(ds, &layout, &prior)?;
    let cost = |x: &[f64]| -objective.value(x);

    let mut rng = stream_rng(config.seed, Purpose::Optimizer, 0);
    let starts = lhs_with_rng(config.optimizer.starts, &layout.start_box(ds, &prior)?, &mut rng)?;

    let local = NelderMeadOptions {
        max_evals: config.optimizer.max_evals,
        ..Default::default()
    };
    let mut reports = Vec::with_capacity(starts.nrows());
    let mut locals = Vec::with_capacity(starts.nrows());
    for (index, row) in starts.row_iter().enumerate() {
        let x0: Vec<f64> = row.iter().copied().collect();
        let start_objective = objective.value(&x0);
        let r = nelder_mead(cost, &x0, &bounds, &local);
        reports.push(StartReport {
            index,
            start_objective,
            final_objective: -r.f,
            evaluations: r.evals,
            converged: r.converged,
        });
        locals.push(r);
    }
    // Stable sort: ties keep the earlier start.
    let mut order: Vec<usize> = (0..locals.len()).filter(|&i| locals[i].f.is_finite()).collect();
    if order.is_empty() {
        return Err(Error::Unfittable(format!(
            "the Gram matrix could not be factored at any of the {} starts",
            reports.len()
        )));
    }
    order.sort_by(|&a, &b| locals[a].f.total_cmp(&locals[b].f));

    let mut polished = Vec::new();
    let mut best: Option<(usize, LocalResult)> = None;
    for &index in order.iter().take(config.optimizer.refine.max(1)) {
        let (incumbent, report) = polish(cost, locals[index].clone(), &bounds, config.optimizer.polish_evals);
        polished.push(PolishReport { start: index, ..report });
        if best.as_ref().is_none_or(|(_, b)| incumbent.f < b.f) {
            best = Some((index, incumbent));
        }
    }
    let (best_start, incumbent) = best.expect("at least one start is refined");

    let (kernel, mut noise) = layout.unpack(&incumbent.x)?;
    let observed = layout.log_lambdas(&incumbent.x).to_vec();
    for &t in &config.prediction_levels {
        if ds.level_index(t).is_none() {
            noise.set(t, prior.conditional_mode(&observed))?;
        }
    }
    let model = FittedModel::new(ds.clone(), kernel, noise)?;
    let total_evaluations = reports.iter().map(|r| r.evaluations).sum::<usize>()
        + polished.iter().map(|p| p.evaluations).sum::<usize>();
    let objective_value = -incumbent.f;
    Ok(MapFit {
        model,
        theta: incumbent.x,
        layout,
        prior,
        objective: objective_value,
        report: OptimizationReport {
            starts: reports,
            polished,
            best_start,
            total_evaluations,
            final_objective: objective_value,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{kernel_eval, MaternParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn two_scale_fixture() -> (Dataset, ParameterLayout, LambdaPrior, Vec<f64>) {
        let rows = vec![
            (vec![0.1, 0.9], 1.0, 1.3),
            (vec![0.4, 0.2], 1.0, 0.2),
            (vec![0.8, 0.5], 1.0, -0.7),
            (vec![0.1, 0.9], 0.5, 1.1),
            (vec![0.6, 0.6], 0.5, 0.4),
        ];
        let ds = Dataset::from_rows(&rows).unwrap();
        let layout = ParameterLayout::for_dataset(&ds, ModelVariant::TwoScale, Smoothness::FiveHalves);
        let prior = LambdaPrior::for_dataset(&ds, 0.01).unwrap();
        let theta = vec![
            0.3, -1.0, -0.5, // ideal
            -1.2, -0.7, 0.1, // error
            0.4, // ln L
            -3.0, -2.0, // ln lambda at 0.5 and 1.0
        ];
        (ds, layout, prior, theta)
    }

    /// `ln ∫ N(Z; m 1, K) dm` by Simpson quadrature, with `K^{-1}` and
    /// `det K` from an LU decomposition.
    fn quadrature_oracle(ds: &Dataset, kernel: &KernelSpec, noise: &NoiseModel) -> f64 {
        let n = ds.len();
        let k = DMatrix::from_fn(n, n, |i, j| {
            let a = ds.input_row(i);
            let b = ds.input_row(j);
            let mut v = kernel_eval((&a, ds.fidelities()[i]), (&b, ds.fidelities()[j]), kernel).unwrap();
            if i == j {
                v += noise.variance(ds.fidelities()[i]).unwrap();
            }
            v
        });
        let lu = k.clone().lu();
        let kinv = lu.try_inverse().unwrap();
        let logdet = k.determinant().ln();
        let z = ds.outputs();
        let ones = DVector::from_element(n, 1.0);
        let den = (ones.transpose() * &kinv * &ones)[0];
        let centre = (ones.transpose() * &kinv * z)[0] / den;
        let log_f = |m: f64| {
            let r = z - DVector::from_element(n, m);
            -0.5 * (r.transpose() * &kinv * &r)[0] - 0.5 * logdet - 0.5 * n as f64 * LN_2PI
        };
        let top = log_f(centre);
        let half = 14.0 / den.sqrt();
        let steps = 4000;
        let h = 2.0 * half / steps as f64;
        let mut sum = 0.0;
        for s in 0..=steps {
            let w = if s == 0 || s == steps {
                1.0
            } else if s % 2 == 1 {
                4.0
            } else {
                2.0
            };
            sum += w * (log_f(centre - half + s as f64 * h) - top).exp();
        }
        top + (sum * h / 3.0).ln()
    }

    #[test]
    fn objective_matches_quadrature_oracle() {
        let (ds, layout, prior, theta) = two_scale_fixture();
        let (kernel, noise) = layout.unpack(&theta).unwrap();
        let expected = quadrature_oracle(&ds, &kernel, &noise)
            + prior.log_density(layout.log_lambdas(&theta)).unwrap();
        let got = map_objective(&theta, &ds, &layout, &prior);
        assert!((got - expected).abs() < 1e-8, "{got} vs {expected}");
        let direct = restricted_log_likelihood(&ds, &kernel, &noise).unwrap();
        assert!((direct - quadrature_oracle(&ds, &kernel, &noise)).abs() < 1e-8);
    }

    #[test]
    fn objective_matches_oracle_for_other_variants() {
        let (ds, _, prior, _) = two_scale_fixture();
        let layout = ParameterLayout::for_dataset(&ds, ModelVariant::StationaryJoint, Smoothness::ThreeHalves);
        let theta = vec![0.2, -1.0, -0.3, 0.5, -2.5, -1.5];
        let (kernel, noise) = layout.unpack(&theta).unwrap();
        let expected = quadrature_oracle(&ds, &kernel, &noise)
            + prior.log_density(layout.log_lambdas(&theta)).unwrap();
        assert!((map_objective(&theta, &ds, &layout, &prior) - expected).abs() < 1e-8);

        let single = ds.level_subset(1.0).unwrap();
        let prior = LambdaPrior::for_dataset(&single, 0.01).unwrap();
        let layout = ParameterLayout::for_dataset(&single, ModelVariant::SingleLevel, Smoothness::Half);
        let theta = vec![0.0, -0.8, 0.2, -2.0];
        let (kernel, noise) = layout.unpack(&theta).unwrap();
        let expected = quadrature_oracle(&single, &kernel, &noise)
            + prior.log_density(layout.log_lambdas(&theta)).unwrap();
        assert!((map_objective(&theta, &single, &layout, &prior) - expected).abs() < 1e-8);
    }

    #[test]
    fn doubling_prior_weight_adds_the_log_prior_once_more() {
        let (ds, layout, mut prior, theta) = two_scale_fixture();
        let base = map_objective(&theta, &ds, &layout, &prior);
        prior.weight = 2.0;
        let doubled = map_objective(&theta, &ds, &layout, &prior);
        let lp = prior.log_density(layout.log_lambdas(&theta)).unwrap();
        assert!((doubled - base - lp).abs() < 1e-10);
        prior.weight = 0.0;
        let (kernel, noise) = layout.unpack(&theta).unwrap();
        let ll = restricted_log_likelihood(&ds, &kernel, &noise).unwrap();
        assert!((map_objective(&theta, &ds, &layout, &prior) - ll).abs() < 1e-10);
    }

    /// Draws outputs from a zero-mean single-level GP prior plus noise.
    fn sample_prior(n: usize, variance: f64, rho: f64, lambda: f64, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let p = MaternParams::new(variance, vec![rho], Smoothness::FiveHalves).unwrap();
        let k = DMatrix::from_fn(n, n, |i, j| {
            crate::kernels::matern(&[x[i] - x[j]], &p).unwrap() + if i == j { lambda } else { 0.0 }
        });
        let l = k.cholesky().unwrap().l();
        let e = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let z = l * e;
        let rows: Vec<_> = (0..n).map(|i| (vec![x[i]], 1.0, 5.0 + z[i])).collect();
        Dataset::from_rows(&rows).unwrap()
    }

    #[test]
    fn larger_than_true_noise_scores_lower() {
        let ds = sample_prior(60, 2.0, 0.2, 0.01, 3);
        let prior = LambdaPrior::for_dataset(&ds, 0.01).unwrap();
        let layout = ParameterLayout::for_dataset(&ds, ModelVariant::SingleLevel, Smoothness::FiveHalves);
        let truth = vec![2f64.ln(), 0.2f64.ln(), 0.01f64.ln()];
        let inflated = vec![2f64.ln(), 0.2f64.ln(), 1.0f64.ln()];
        assert!(map_objective(&truth, &ds, &layout, &prior) > map_objective(&inflated, &ds, &layout, &prior));
    }

    #[test]
    fn row_order_does_not_matter() {
        let (ds, layout, prior, theta) = two_scale_fixture();
        let permuted = ds.select_rows(&[3, 0, 4, 2, 1]).unwrap();
        let a = map_objective(&theta, &ds, &layout, &prior);
        let b = map_objective(&theta, &permuted, &layout, &prior);
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn failed_factorization_is_minus_infinity() {
        let rows = vec![(vec![0.5], 1.0, 1.0), (vec![0.5], 1.0, 2.0), (vec![0.9], 1.0, 0.0)];
        let ds = Dataset::from_rows(&rows).unwrap();
        let prior = LambdaPrior::for_dataset(&ds, 0.01).unwrap();
        let layout = ParameterLayout::for_dataset(&ds, ModelVariant::SingleLevel, Smoothness::FiveHalves);
        assert_eq!(map_objective(&[0.0, 0.0, f64::NAN], &ds, &layout, &prior), f64::NEG_INFINITY);
        assert_eq!(map_objective(&[0.0, 0.0], &ds, &layout, &prior), f64::NEG_INFINITY);
    }

    fn quick_config(seed: u64) -> FitConfig {
        FitConfig {
            optimizer: OptimizerSettings {
                starts: 4,
                max_evals: 300,
                refine: 1,
                polish_evals: 1000,
            },
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn fit_is_deterministic() {
        let ds = sample_prior(40, 1.0, 0.3, 0.05, 11);
        let a = map_fit(&ds, ModelVariant::SingleLevel, &quick_config(4)).unwrap();
        let b = map_fit(&ds, ModelVariant::SingleLevel, &quick_config(4)).unwrap();
        assert_eq!(a.theta.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.theta.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        assert_eq!(a.report, b.report);
        let best_start = a.report.starts.iter().map(|s| s.start_objective).fold(f64::NEG_INFINITY, f64::max);
        assert!(a.objective >= best_start);
    }

    #[test]
    fn recovers_single_level_parameters() {
        let (variance, rho, lambda) = (2.0f64, 0.2f64, 0.01f64);
        let mut estimates = vec![Vec::new(); 3];
        for seed in 0..10 {
            let ds = sample_prior(200, variance, rho, lambda, 100 + seed);
            let fit = map_fit(&ds, ModelVariant::SingleLevel, &quick_config(seed)).unwrap();
            for (e, v) in estimates.iter_mut().zip(&fit.theta) {
                e.push(*v);
            }
        }
        for (e, truth) in estimates.iter_mut().zip([variance.ln(), rho.ln(), lambda.ln()]) {
            e.sort_by(f64::total_cmp);
            let median = 0.5 * (e[4] + e[5]);
            assert!((median - truth).abs() < 0.7, "median {median} vs {truth}");
        }
    }

    #[test]
    fn vanishing_error_is_detected() {
        // Level 100 carries a large error term, level 10 almost none.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut rows = Vec::new();
        for (t, n) in [(100.0, 40), (10.0, 20)] {
            for _ in 0..n {
                let x: f64 = rng.random();
                let ideal = 3.0 * (2.0 * std::f64::consts::PI * x).sin();
                let error = 2.0 * (t / 100.0f64).powi(2) * (5.0 * x).cos();
                let e: f64 = rng.sample(StandardNormal);
                rows.push((vec![x], t, ideal + error + 0.05 * e));
            }
        }
        let ds = Dataset::from_rows(&rows).unwrap();
        let fit = map_fit(&ds, ModelVariant::TwoScale, &quick_config(2)).unwrap();
        let KernelSpec::TwoScale { ideal, error, temporal } = fit.model.kernel() else {
            panic!("wrong variant");
        };
        let at_finest = error.variance * (10.0 / temporal.t_scale).powf(temporal.exponent);
        assert!(at_finest < 0.1 * ideal.variance, "{at_finest} vs {}", ideal.variance);
    }

    #[test]
    fn prediction_levels_get_the_conditional_mode() {
        let (ds, _, _, _) = two_scale_fixture();
        let mut config = quick_config(1);
        config.prediction_levels = vec![0.25, 1.0];
        let fit = map_fit(&ds, ModelVariant::TwoScale, &config).unwrap();
        let observed = fit.layout.log_lambdas(&fit.theta);
        let expected = fit.prior.conditional_mode(observed);
        assert_eq!(fit.model.noise().log_variance(0.25), Some(expected));
        assert_eq!(fit.model.noise().log_variance(1.0), Some(observed[1]));
        assert!(fit.model.predict_noisy(&[crate::dataset::Site::new(vec![0.2, 0.2], 0.25)]).is_ok());
    }

    #[test]
    fn single_level_needs_one_level() {
        let (ds, _, _, _) = two_scale_fixture();
        assert!(matches!(map_fit(&ds, ModelVariant::SingleLevel, &FitConfig::default()), Err(Error::Config(_))));
        let mut config = FitConfig::default();
        config.optimizer.starts = 0;
        assert!(map_fit(&ds, ModelVariant::TwoScale, &config).is_err());
    }
}
