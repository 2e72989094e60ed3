use std::path::{Path, PathBuf};

use mfgp::designs::{design_cost, lhs, CostTable};
use mfgp::io::{self, SCHEMA_VERSION};
use mfgp::risk::{kde_on_interval, summarize, ExceedanceSummary};
use mfgp::{
    exceedance_posterior, map_fit, read_dataset, write_dataset, DensityCurve, Error, FittedModel,
    ModelDocument, RunConfig, Site,
};
use serde::Serialize;

use crate::args::{Cli, Command, Common, DesignArgs, ExceedArgs, FitArgs, ModelArgs, PredictArgs, SimulateArgs};

pub enum CliError {
    /// Bad invocation or configuration (exit code 2).
    Usage(String),
    /// Anything that went wrong while computing (exit code 1).
    Failure(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(msg) => CliError::Usage(msg),
            other => CliError::Failure(other),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Design(a) => design(a),
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit(a),
        Command::Validate(a) => validate(a),
        Command::Predict(a) => predict(a),
        Command::Exceed(a) => exceed(a),
        Command::Report(a) => report(a),
    }
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let mut config = match &common.config {
        Some(path) => {
            if !path.exists() {
                return Err(CliError::Usage(format!("config file {} does not exist", path.display())));
            }
            RunConfig::load(path).map_err(|e| match e {
                Error::Io(io) => CliError::Usage(format!("cannot read {}: {io}", path.display())),
                other => CliError::Usage(other.to_string()),
            })?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(out) = &common.out {
        config.paths.out_dir = out.clone();
    }
    Ok(config)
}

fn checked(config: RunConfig) -> Result<RunConfig> {
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(config)
}

fn input_file(path: PathBuf, what: &str) -> Result<PathBuf> {
    if path.exists() {
        Ok(path)
    } else {
        Err(CliError::Usage(format!("{what} file {} does not exist", path.display())))
    }
}

/// Paths given as flags are relative to the working directory, not to the
/// output directory.
fn from_cwd(p: PathBuf) -> Result<PathBuf> {
    Ok(std::path::absolute(&p).map_err(Error::from)?)
}

fn note(msg: impl AsRef<str>) {
    eprintln!("{}", msg.as_ref());
}

/// JSON envelope written by every command besides `fit`.
#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    schema_version: u32,
    #[serde(flatten)]
    body: T,
    config: &'a RunConfig,
}

fn write_document<T: Serialize>(path: &Path, body: T, config: &RunConfig) -> Result<()> {
    io::write_json(
        path,
        &Document {
            schema_version: SCHEMA_VERSION,
            body,
            config,
        },
    )?;
    Ok(())
}

fn design(a: DesignArgs) -> Result<()> {
    let mut config = load_config(&a.common)?;
    if let Some(k) = a.kind {
        config.design.kind = k;
    }
    if let Some(d) = a.dim {
        config.design.dim = d;
    }
    if let Some(l) = a.levels {
        config.design.levels = l;
    }
    if let Some(c) = a.counts {
        config.design.counts = c;
    }
    if let Some(p) = a.design {
        config.paths.design = from_cwd(p)?;
    }
    let config = checked(config)?;
    let sites = config.design_spec().generate().map_err(|e| CliError::Usage(e.to_string()))?;
    let path = config.paths.resolve(&config.paths.design);
    io::write_sites(&path, &sites)?;
    let cost = design_cost(&sites, &CostTable::fire_simulator())
        .map(|c| format!(", {c} simulator hours"))
        .unwrap_or_default();
    note(format!("wrote {} sites to {}{cost}", sites.len(), path.display()));
    Ok(())
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let mut config = load_config(&a.common)?;
    if let Some(p) = a.design {
        config.paths.design = from_cwd(p)?;
    }
    if let Some(p) = a.data {
        config.paths.data = from_cwd(p)?;
    }
    if a.zero_noise {
        config.simulator.zero_noise = true;
    }
    let config = checked(config)?;
    let sites = io::read_sites(&input_file(config.paths.resolve(&config.paths.design), "design")?)?;
    let mut truth = config.simulator.clone();
    truth.dim = sites[0].x.len();
    let ds = truth.simulate(&sites, config.seed)?;
    let path = config.paths.resolve(&config.paths.data);
    write_dataset(&path, &ds)?;
    note(format!("wrote {} runs to {}", ds.len(), path.display()));
    Ok(())
}

fn fit(a: FitArgs) -> Result<()> {
    let mut config = load_config(&a.common)?;
    if let Some(p) = a.data {
        config.paths.data = from_cwd(p)?;
    }
    if let Some(p) = a.model {
        config.paths.model = from_cwd(p)?;
    }
    if let Some(v) = a.variant {
        config.model.variant = v;
    }
    if let Some(s) = a.smoothness {
        config.model.smoothness = s;
    }
    if let Some(s) = a.starts {
        config.optimizer.starts = s;
    }
    if let Some(m) = a.max_evals {
        config.optimizer.max_evals = m;
    }
    if let Some(m) = a.polish_evals {
        config.optimizer.polish_evals = m;
    }
    if let Some(t) = a.t_star {
        config.prediction.t_star = t;
    }
    let config = checked(config)?;
    let ds = read_dataset(&input_file(config.paths.resolve(&config.paths.data), "data")?)?;
    let fit = map_fit(&ds, config.model.variant, &config.fit_config())?;
    let path = config.paths.resolve(&config.paths.model);
    ModelDocument::from_fit(&fit, &config).save(&path)?;
    note(format!(
        "fitted {} model to {} runs: objective {:.6}, {} evaluations; wrote {}",
        config.model.variant.as_str(),
        ds.len(),
        fit.objective,
        fit.report.total_evaluations,
        path.display()
    ));
    Ok(())
}

/// The fitted model plus its stored document, with a noise variance at
/// `t_star`.
fn load_model(config: &RunConfig, model: Option<PathBuf>, t_star: f64) -> Result<(ModelDocument, FittedModel)> {
    let path = match model {
        Some(p) => p,
        None => config.paths.resolve(&config.paths.model),
    };
    let doc = ModelDocument::load(&input_file(path, "model")?)?;
    let fitted = with_level(&doc, doc.to_model()?, t_star)?;
    Ok((doc, fitted))
}

/// Adds the conditional prior mode of `ln lambda` at `t` when the model has
/// no noise variance there.
fn with_level(doc: &ModelDocument, model: FittedModel, t: f64) -> Result<FittedModel> {
    if model.noise().log_variance(t).is_some() {
        return Ok(model);
    }
    let observed: Vec<f64> = doc
        .prior
        .levels
        .iter()
        .map(|&l| model.noise().log_variance(l).ok_or(Error::UnknownLevel(l)))
        .collect::<std::result::Result<_, _>>()?;
    Ok(model.with_noise_level(t, doc.prior.conditional_mode(&observed))?)
}

#[derive(Serialize)]
struct LooSummary {
    n: usize,
    residual_mean: f64,
    residual_sd: f64,
    rmse: f64,
}

fn loo_summary(model: &FittedModel) -> Result<(Vec<mfgp::LooEntry>, LooSummary)> {
    let loo = model.loo()?;
    let n = loo.len() as f64;
    let mean = loo.iter().map(|e| e.residual).sum::<f64>() / n;
    let sd = (loo.iter().map(|e| (e.residual - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let z = model.dataset().outputs();
    let rmse = (loo.iter().enumerate().map(|(i, e)| (z[i] - e.mean).powi(2)).sum::<f64>() / n).sqrt();
    let summary = LooSummary {
        n: loo.len(),
        residual_mean: mean,
        residual_sd: sd,
        rmse,
    };
    Ok((loo, summary))
}

fn validate(a: ModelArgs) -> Result<()> {
    let config = checked(load_config(&a.common)?)?;
    let t_star = config.prediction.t_star;
    let (_, model) = load_model(&config, a.model, t_star)?;
    let (loo, summary) = loo_summary(&model)?;
    let out = &config.paths.out_dir;
    io::write_loo(&out.join("loo.csv"), model.dataset(), &loo)?;
    note(format!(
        "LOO over {} runs: residual mean {:.4}, sd {:.4}",
        summary.n, summary.residual_mean, summary.residual_sd
    ));
    write_document(&out.join("loo_summary.json"), summary, &config)
}

fn predict(a: PredictArgs) -> Result<()> {
    let mut config = load_config(&a.common)?;
    if let Some(t) = a.t_star {
        config.prediction.t_star = t;
    }
    if let Some(n) = a.n_points {
        config.prediction.n_points = n;
    }
    let config = checked(config)?;
    let t_star = config.prediction.t_star;
    let (doc, mut model) = load_model(&config, a.model, t_star)?;
    let sites = match a.sites {
        Some(p) => io::read_sites(&input_file(p, "sites")?)?,
        None => {
            let bounds = model.dataset().input_bounds();
            let x = lhs(config.prediction.n_points, &bounds, config.seed)?;
            x.row_iter().map(|r| Site::new(r.iter().copied().collect(), t_star)).collect()
        }
    };
    for s in &sites {
        model = with_level(&doc, model, s.t)?;
    }
    let pred = model.predict_noisy(&sites)?;
    let path = config.paths.out_dir.join("predictions.csv");
    io::write_predictions(&path, &sites, &pred)?;
    note(format!("wrote {} predictions to {}", sites.len(), path.display()));
    Ok(())
}

#[derive(Serialize)]
struct ExceedSummary {
    threshold: f64,
    t_star: f64,
    n_sim: usize,
    n_pts: usize,
    seed: u64,
    summary: ExceedanceSummary,
    density: DensityInfo,
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum DensityInfo {
    Curve { bandwidth: f64, grid_size: usize },
    PointMass { at: f64 },
}

fn exceed(a: ExceedArgs) -> Result<()> {
    let mut config = load_config(&a.common)?;
    if let Some(t) = a.t_star {
        config.prediction.t_star = t;
    }
    if let Some(t) = a.threshold {
        config.exceedance.threshold = t;
    }
    if let Some(n) = a.n_sim {
        config.exceedance.n_sim = n;
    }
    if let Some(n) = a.n_pts {
        config.exceedance.n_pts = n;
    }
    let config = checked(config)?;
    let (_, model) = load_model(&config, a.model, config.prediction.t_star)?;
    let cfg = config.exceedance_config(model.dataset().input_bounds());
    let result = exceedance_posterior(&model, &cfg)?;
    let out = &config.paths.out_dir;
    io::write_p_samples(&out.join("p_samples.csv"), &result)?;
    io::write_density(&out.join("exceedance_density.csv"), &result.density, "p")?;
    let density = match &result.density {
        DensityCurve::Curve { grid, bandwidth, .. } => DensityInfo::Curve {
            bandwidth: *bandwidth,
            grid_size: grid.len(),
        },
        DensityCurve::PointMass { at } => DensityInfo::PointMass { at: *at },
    };
    note(format!(
        "P(exceed {}) at t = {}: mean {:.4}, 95% interval [{:.4}, {:.4}]",
        cfg.threshold, cfg.t_star, result.summary.mean, result.summary.lower_95, result.summary.upper_95
    ));
    write_document(
        &out.join("exceedance_summary.json"),
        ExceedSummary {
            threshold: cfg.threshold,
            t_star: cfg.t_star,
            n_sim: cfg.n_sim,
            n_pts: cfg.n_pts,
            seed: cfg.seed,
            summary: result.summary.clone(),
            density,
        },
        &config,
    )
}

#[derive(Serialize)]
struct ReportSummary {
    tables: Vec<String>,
    loo: LooSummary,
}

/// Writes `report_loo.csv` (observation vs LOO prediction with 95% bands),
/// `report_residual_density.csv` (KDE of standardized residuals next to the
/// standard normal), `report_levels.csv` (per-level noise and residual
/// statistics) and, when `p_samples.csv` exists, `report_exceedance_density.csv`.
fn report(a: ModelArgs) -> Result<()> {
    let config = checked(load_config(&a.common)?)?;
    let (_, model) = load_model(&config, a.model, config.prediction.t_star)?;
    let (loo, summary) = loo_summary(&model)?;
    let out = &config.paths.out_dir;
    let ds = model.dataset();
    let mut tables = Vec::new();

    let mut rows = vec!["row,t,observation,prediction,lower_95,upper_95,residual".to_string()];
    for (i, e) in loo.iter().enumerate() {
        let half = 1.959963984540054 * e.variance_observation.sqrt();
        rows.push(format!(
            "{i},{},{},{},{},{},{}",
            ds.fidelities()[i],
            ds.outputs()[i],
            e.mean,
            e.mean - half,
            e.mean + half,
            e.residual
        ));
    }
    write_lines(&out.join("report_loo.csv"), &rows)?;
    tables.push("report_loo.csv".into());

    let residuals: Vec<f64> = loo.iter().map(|e| e.residual).collect();
    let mut rows = vec!["residual,density,standard_normal".to_string()];
    match kde_on_interval(&residuals, -4.0, 4.0, 401)? {
        DensityCurve::Curve { grid, density, .. } => {
            for (g, v) in grid.iter().zip(&density) {
                let phi = (-0.5 * g * g).exp() / (2.0 * std::f64::consts::PI).sqrt();
                rows.push(format!("{g},{v},{phi}"));
            }
        }
        DensityCurve::PointMass { at } => rows.push(format!("{at},inf,")),
    }
    write_lines(&out.join("report_residual_density.csv"), &rows)?;
    tables.push("report_residual_density.csv".into());

    let mut rows = vec!["level,count,noise_variance,residual_mean,residual_sd".to_string()];
    for level in ds.levels() {
        let r: Vec<f64> = (0..ds.len())
            .filter(|&i| mfgp::dataset::same_level(ds.fidelities()[i], level.value))
            .map(|i| residuals[i])
            .collect();
        let n = r.len() as f64;
        let mean = r.iter().sum::<f64>() / n;
        let sd = if r.len() > 1 {
            (r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            f64::NAN
        };
        let noise = model.noise().variance(level.value).unwrap_or(f64::NAN);
        rows.push(format!("{},{},{noise},{mean},{sd}", level.value, level.count));
    }
    write_lines(&out.join("report_levels.csv"), &rows)?;
    tables.push("report_levels.csv".into());

    let samples_path = out.join("p_samples.csv");
    if samples_path.exists() {
        let samples = read_p_samples(&samples_path)?;
        let stats = summarize(&samples);
        let curve = mfgp::kde_density(&samples, config.exceedance.grid_size)?;
        io::write_density(&out.join("report_exceedance_density.csv"), &curve, "p")?;
        tables.push("report_exceedance_density.csv".into());
        note(format!(
            "exceedance samples: mean {:.4}, 95% interval [{:.4}, {:.4}]",
            stats.mean, stats.lower_95, stats.upper_95
        ));
    } else {
        note("no p_samples.csv found; run `exceed` first for the exceedance density table");
    }
    note(format!("wrote {} tables to {}", tables.len(), out.display()));
    write_document(&out.join("report.json"), ReportSummary { tables, loo: summary }, &config)
}

fn write_lines(path: &Path, rows: &[String]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(Error::from)?;
    }
    let mut text = rows.join("\n");
    text.push('\n');
    std::fs::write(path, text).map_err(Error::from)?;
    Ok(())
}

fn read_p_samples(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(Error::from)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let p = line
            .split(',')
            .nth(1)
            .and_then(|v| v.trim().parse::<f64>().ok())
            .ok_or_else(|| Error::Parse {
                line: i as u64 + 1,
                message: "expected `replicate,p`".into(),
            })?;
        out.push(p);
    }
    Ok(out)
}
