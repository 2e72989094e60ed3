use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use mfgp::designs::DesignKind;
use mfgp::{ModelVariant, Smoothness};

/// Multi-fidelity Gaussian-process surrogates for stochastic simulators.
#[derive(Debug, Parser)]
#[command(name = "mfgp", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a nested multi-fidelity design or a Latin hypercube.
    Design(DesignArgs),
    /// Run the synthetic simulator on a design.
    Simulate(SimulateArgs),
    /// MAP fit of a model to a dataset.
    Fit(FitArgs),
    /// Leave-one-out cross-validation of a fitted model.
    Validate(ModelArgs),
    /// Predict at given sites or on a Latin hypercube at the target level.
    Predict(PredictArgs),
    /// Posterior distribution of a threshold-exceedance probability.
    Exceed(ExceedArgs),
    /// Tidy tables for plotting fit diagnostics and exceedance densities.
    Report(ModelArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML (or .json) run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DesignArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_parser = parse_kind)]
    pub kind: Option<DesignKind>,
    #[arg(long)]
    pub dim: Option<usize>,
    /// Comma-separated levels, coarsest first.
    #[arg(long, value_delimiter = ',')]
    pub levels: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub counts: Option<Vec<usize>>,
    /// Design file to write.
    #[arg(long)]
    pub design: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Design file to read.
    #[arg(long)]
    pub design: Option<PathBuf>,
    /// Dataset file to write.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub zero_noise: bool,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Model file to write.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, value_parser = parse_variant)]
    pub variant: Option<ModelVariant>,
    #[arg(long, value_parser = parse_smoothness)]
    pub smoothness: Option<Smoothness>,
    #[arg(long)]
    pub starts: Option<usize>,
    #[arg(long)]
    pub max_evals: Option<usize>,
    #[arg(long)]
    pub polish_evals: Option<usize>,
    #[arg(long)]
    pub t_star: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[command(flatten)]
    pub common: Common,
    /// Model file to read.
    #[arg(long)]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Sites file (`x1..xd,t`); a Latin hypercube at `t_star` when absent.
    #[arg(long)]
    pub sites: Option<PathBuf>,
    #[arg(long)]
    pub t_star: Option<f64>,
    #[arg(long)]
    pub n_points: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ExceedArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub t_star: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub n_sim: Option<usize>,
    #[arg(long)]
    pub n_pts: Option<usize>,
}

fn parse_variant(s: &str) -> Result<ModelVariant, String> {
    s.parse().map_err(|e: mfgp::Error| e.to_string())
}

fn parse_smoothness(s: &str) -> Result<Smoothness, String> {
    s.parse().map_err(|e: mfgp::Error| e.to_string())
}

fn parse_kind(s: &str) -> Result<DesignKind, String> {
    match s {
        "nested" => Ok(DesignKind::Nested),
        "lhs" => Ok(DesignKind::Lhs),
        _ => Err(format!("unknown design kind `{s}` (nested, lhs)")),
    }
}
