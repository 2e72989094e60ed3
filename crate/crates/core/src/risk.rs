//! Posterior distribution of a threshold-exceedance probability.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Site;
use crate::error::{Error, Result};
use crate::gp::FittedModel;
use crate::rng::{stream_rng, Purpose};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExceedanceConfig {
    pub threshold: f64,
    /// Fidelity level at which the latent mean is simulated.
    pub t_star: f64,
    pub n_sim: usize,
    pub n_pts: usize,
    /// Independent uniform input distribution on this box.
    pub bounds: Vec<(f64, f64)>,
    pub grid_size: usize,
    pub seed: u64,
}

impl ExceedanceConfig {
    pub fn new(dim: usize, t_star: f64, seed: u64) -> Self {
        ExceedanceConfig {
            threshold: 60.0,
            t_star,
            n_sim: 1000,
            n_pts: 5000,
            bounds: vec![(0.0, 1.0); dim],
            grid_size: 512,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sim < 2 || self.n_pts < 2 {
            return Err(Error::Config(format!(
                "n_sim and n_pts must be at least 2 (got {} and {})",
                self.n_sim, self.n_pts
            )));
        }
        if self.grid_size < 2 {
            return Err(Error::Config("the density grid needs at least 2 points".into()));
        }
        if !(self.t_star > 0.0) {
            return Err(Error::NonPositiveFidelity(self.t_star));
        }
        if self.bounds.is_empty()
            || self
                .bounds
                .iter()
                .any(|&(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo < hi))
        {
            return Err(Error::Config(format!("invalid input box {:?}", self.bounds)));
        }
        Ok(())
    }
}

/// A density estimate on a uniform grid, or a point mass when every sample
/// is identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DensityCurve {
    Curve {
        grid: Vec<f64>,
        density: Vec<f64>,
        bandwidth: f64,
    },
    PointMass {
        at: f64,
    },
}

impl DensityCurve {
    /// Trapezoid integral of the curve (1 for a point mass).
    pub fn integral(&self) -> f64 {
        match self {
            DensityCurve::Curve { grid, density, .. } => trapezoid(grid, density),
            DensityCurve::PointMass { .. } => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExceedanceSummary {
    pub mean: f64,
    pub sd: f64,
    pub lower_95: f64,
    pub upper_95: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExceedanceResult {
    pub p_samples: Vec<f64>,
    pub density: DensityCurve,
    pub summary: ExceedanceSummary,
}

fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}

/// Linear-interpolation sample quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn mean_sd(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

/// Silverman's rule-of-thumb bandwidth `0.9 min(sd, IQR / 1.34) n^(-1/5)`.
pub fn silverman_bandwidth(samples: &[f64]) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (_, sd) = mean_sd(samples);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    0.9 * spread * (samples.len() as f64).powf(-0.2)
}

fn gaussian(u: f64) -> f64 {
    (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn all_identical(samples: &[f64]) -> bool {
    samples.windows(2).all(|w| w[0] == w[1])
}

/// Gaussian KDE of probabilities on `[0, 1]`, reflected at both ends and
/// renormalized to unit trapezoid mass on a `grid_size`-point grid.
pub fn kde_density(samples: &[f64], grid_size: usize) -> Result<DensityCurve> {
    if samples.len() < 2 {
        return Err(Error::NotEnoughPoints {
            needed: 2,
            found: samples.len(),
        });
    }
    if grid_size < 2 {
        return Err(Error::Config("the density grid needs at least 2 points".into()));
    }
    if let Some(bad) = samples.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidParameter {
            name: "probability sample".into(),
            value: *bad,
        });
    }
    if all_identical(samples) {
        return Ok(DensityCurve::PointMass { at: samples[0] });
    }
    let h = silverman_bandwidth(samples);
    let n = samples.len() as f64;
    let grid: Vec<f64> = (0..grid_size)
        .map(|i| i as f64 / (grid_size - 1) as f64)
        .collect();
    let mut density: Vec<f64> = grid
        .iter()
        .map(|&p| {
            samples
                .iter()
                .map(|&s| gaussian((p - s) / h) + gaussian((p + s) / h) + gaussian((p - (2.0 - s)) / h))
                .sum::<f64>()
                / (n * h)
        })
        .collect();
    let mass = trapezoid(&grid, &density);
    if mass > 0.0 {
        density.iter_mut().for_each(|v| *v /= mass);
    }
    Ok(DensityCurve::Curve {
        grid,
        density,
        bandwidth: h,
    })
}

/// Plain Gaussian KDE (no boundary correction) on `[lo, hi]`.
pub fn kde_on_interval(samples: &[f64], lo: f64, hi: f64, grid_size: usize) -> Result<DensityCurve> {
    if samples.len() < 2 {
        return Err(Error::NotEnoughPoints {
            needed: 2,
            found: samples.len(),
        });
    }
    if all_identical(samples) {
        return Ok(DensityCurve::PointMass { at: samples[0] });
    }
    if !(lo < hi) || grid_size < 2 {
        return Err(Error::Config(format!("invalid density grid [{lo}, {hi}] x {grid_size}")));
    }
    let h = silverman_bandwidth(samples);
    let n = samples.len() as f64;
    let grid: Vec<f64> = (0..grid_size)
        .map(|i| lo + (hi - lo) * i as f64 / (grid_size - 1) as f64)
        .collect();
    let density = grid
        .iter()
        .map(|&x| samples.iter().map(|&s| gaussian((x - s) / h)).sum::<f64>() / (n * h))
        .collect();
    Ok(DensityCurve::Curve {
        grid,
        density,
        bandwidth: h,
    })
}

/// Input sample shared by all replicates.
pub fn input_sample(cfg: &ExceedanceConfig) -> Vec<Site> {
    let mut rng = stream_rng(cfg.seed, Purpose::InputSample, 0);
    (0..cfg.n_pts)
        .map(|_| {
            let x = cfg
                .bounds
                .iter()
                .map(|&(lo, hi)| lo + (hi - lo) * rng.random::<f64>())
                .collect();
            Site::new(x, cfg.t_star)
        })
        .collect()
}

/// Summary statistics of probability samples.
pub fn summarize(p_samples: &[f64]) -> ExceedanceSummary {
    let (mean, sd) = mean_sd(p_samples);
    let mut sorted = p_samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    ExceedanceSummary {
        mean,
        sd,
        lower_95: quantile_sorted(&sorted, 0.025),
        upper_95: quantile_sorted(&sorted, 0.975),
    }
}

/// Posterior draws of `P_X(xi(X, t*) > threshold)`: each conditional
/// simulation of the latent mean over a common input sample yields one
/// exceedance fraction.
pub fn exceedance_posterior(model: &FittedModel, cfg: &ExceedanceConfig) -> Result<ExceedanceResult> {
    cfg.validate()?;
    if cfg.bounds.len() != model.dataset().dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dataset().dim(),
            found: cfg.bounds.len(),
        });
    }
    let sites = input_sample(cfg);
    let draws = model.conditional_simulate(&sites, cfg.n_sim, cfg.seed)?;
    let p_samples: Vec<f64> = draws
        .row_iter()
        .map(|row| row.iter().filter(|&&v| v > cfg.threshold).count() as f64 / cfg.n_pts as f64)
        .collect();
    let density = kde_density(&p_samples, cfg.grid_size)?;
    let summary = summarize(&p_samples);
    Ok(ExceedanceResult {
        p_samples,
        density,
        summary,
    })
}
