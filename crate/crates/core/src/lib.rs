//! Bayesian multi-fidelity Gaussian-process modelling of stochastic
//! simulators whose accuracy is tuned by a continuous parameter (e.g. a mesh
//! size): fit on cheap coarse runs, predict the fine-level mean response and
//! estimate the posterior distribution of a threshold-exceedance probability.

pub mod config;
pub mod dataset;
pub mod designs;
pub mod error;
pub mod gp;
pub mod inference;
pub mod io;
pub mod kernels;
pub mod linalg;
pub mod risk;
pub mod rng;
pub mod synthbench;

pub use config::RunConfig;
pub use dataset::{Dataset, Level, Site};
pub use error::{Error, Result};
pub use gp::{FittedModel, LooEntry, NoiseModel, PredictionResult};
pub use inference::{map_fit, map_objective, FitConfig, LambdaPrior, MapFit, OptimizationReport, ParameterLayout};
pub use io::{read_dataset, write_dataset, ModelDocument};
pub use kernels::{kernel_eval, matern, temporal_corr, KernelSpec, MaternParams, ModelVariant, Smoothness, TemporalCorrParams};
pub use risk::{exceedance_posterior, kde_density, DensityCurve, ExceedanceConfig, ExceedanceResult};
pub use synthbench::SyntheticTruth;
