//! Run configuration shared by every pipeline step.
//!
//! Read from TOML, or JSON when the file name ends in `.json`.  Unknown keys
//! are rejected; missing keys take the defaults below.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::designs::{DesignKind, DesignSpec};
use crate::error::{Error, Result};
use crate::inference::{FitConfig, OptimizerSettings, PriorSettings};
use crate::kernels::{ModelVariant, Smoothness};
use crate::risk::ExceedanceConfig;
use crate::synthbench::SyntheticTruth;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub model: ModelSettings,
    pub optimizer: OptimizerSettings,
    pub prior: PriorSettings,
    pub prediction: PredictionSettings,
    pub exceedance: ExceedanceSettings,
    pub design: DesignSettings,
    pub simulator: SyntheticTruth,
    pub paths: PathSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSettings {
    pub variant: ModelVariant,
    pub smoothness: Smoothness,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PredictionSettings {
    /// Target fidelity for prediction and exceedance.
    pub t_star: f64,
    /// Size of the Latin hypercube predicted on when no sites are given.
    pub n_points: usize,
}

impl Default for PredictionSettings {
    fn default() -> Self {
        PredictionSettings {
            t_star: 20.0,
            n_points: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExceedanceSettings {
    pub threshold: f64,
    pub n_sim: usize,
    pub n_pts: usize,
    pub grid_size: usize,
    /// Box of the uniform input distribution; the training-input box when
    /// absent.
    pub bounds: Option<Vec<(f64, f64)>>,
}

impl Default for ExceedanceSettings {
    fn default() -> Self {
        ExceedanceSettings {
            threshold: 60.0,
            n_sim: 1000,
            n_pts: 5000,
            grid_size: 512,
            bounds: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DesignSettings {
    pub kind: DesignKind,
    pub dim: usize,
    /// Coarsest first for nested designs.
    pub levels: Vec<f64>,
    pub counts: Vec<usize>,
    /// Unit box when absent.
    pub bounds: Option<Vec<(f64, f64)>>,
}

impl Default for DesignSettings {
    fn default() -> Self {
        let spec = DesignSpec::fire_multi_fidelity(8, 0);
        DesignSettings {
            kind: spec.kind,
            dim: 8,
            levels: spec.levels,
            counts: spec.counts,
            bounds: None,
        }
    }
}

/// File names used by the pipeline steps, relative to `out_dir` unless
/// absolute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathSettings {
    pub out_dir: PathBuf,
    pub design: PathBuf,
    pub data: PathBuf,
    pub model: PathBuf,
}

impl Default for PathSettings {
    fn default() -> Self {
        PathSettings {
            out_dir: PathBuf::from("out"),
            design: PathBuf::from("design.csv"),
            data: PathBuf::from("data.csv"),
            model: PathBuf::from("model.json"),
        }
    }
}

impl PathSettings {
    pub fn resolve(&self, file: &Path) -> PathBuf {
        if file.is_absolute() {
            file.to_path_buf()
        } else {
            self.out_dir.join(file)
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            model: ModelSettings::default(),
            optimizer: OptimizerSettings::default(),
            prior: PriorSettings::default(),
            prediction: PredictionSettings::default(),
            exceedance: ExceedanceSettings::default(),
            design: DesignSettings::default(),
            simulator: SyntheticTruth::default(),
            paths: PathSettings::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let config = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            Self::from_json_str(&text)?
        } else {
            Self::from_toml_str(&text)?
        };
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.prediction.t_star > 0.0) {
            return Err(Error::NonPositiveFidelity(self.prediction.t_star));
        }
        if self.optimizer.starts == 0 {
            return Err(Error::Config("optimizer.starts must be positive".into()));
        }
        if self.exceedance.n_sim < 2 || self.exceedance.n_pts < 2 {
            return Err(Error::Config("exceedance.n_sim and exceedance.n_pts must be at least 2".into()));
        }
        if self.design.levels.len() != self.design.counts.len() {
            return Err(Error::Config("design.levels and design.counts differ in length".into()));
        }
        Ok(())
    }

    pub fn fit_config(&self) -> FitConfig {
        FitConfig {
            smoothness: self.model.smoothness,
            optimizer: self.optimizer.clone(),
            prior: self.prior.clone(),
            prediction_levels: vec![self.prediction.t_star],
            seed: self.seed,
        }
    }

    pub fn design_spec(&self) -> DesignSpec {
        DesignSpec {
            kind: self.design.kind,
            levels: self.design.levels.clone(),
            counts: self.design.counts.clone(),
            bounds: self
                .design
                .bounds
                .clone()
                .unwrap_or_else(|| vec![(0.0, 1.0); self.design.dim]),
            seed: self.seed,
        }
    }

    /// `default_bounds` stands in when no input box is configured.
    pub fn exceedance_config(&self, default_bounds: Vec<(f64, f64)>) -> ExceedanceConfig {
        let e = &self.exceedance;
        ExceedanceConfig {
            threshold: e.threshold,
            t_star: self.prediction.t_star,
            n_sim: e.n_sim,
            n_pts: e.n_pts,
            bounds: e.bounds.clone().unwrap_or(default_bounds),
            grid_size: e.grid_size,
            seed: self.seed,
        }
    }
}
