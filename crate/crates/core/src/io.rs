//! CSV and JSON persistence.
//!
//! Datasets are CSV files with header `x1,...,xd,t,z` (designs omit `z`).
//! Lines starting with `#` are comments.  Floats are written in their
//! shortest round-trip form, so a write/read cycle is bit-exact.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::dataset::{level_key, Dataset, Site};
use crate::error::{Error, Result};
use crate::gp::{FittedModel, LooEntry, NoiseModel, PredictionResult};
use crate::inference::{LambdaPrior, MapFit, OptimizationReport};
use crate::kernels::{KernelSpec, ModelVariant};
use crate::risk::{DensityCurve, ExceedanceResult};

/// Version of every JSON document written here.
pub const SCHEMA_VERSION: u32 = 1;

fn csv_reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(r)
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

fn parse_err(line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Rows of a table with columns `x1..xd, t` and optionally `z`.  Returns
/// the rows and the line number the table ended at.
fn read_table<R: Read>(r: R, with_z: bool) -> Result<(Vec<(Vec<f64>, f64, f64)>, u64)> {
    let mut reader = csv_reader(r);
    let mut records = reader.records();
    let header = match records.next() {
        Some(h) => h?,
        None => return Err(parse_err(1, "empty file, expected a header")),
    };
    let line = line_of(&header);
    let names: Vec<&str> = header.iter().collect();
    let tail = if with_z { 2 } else { 1 };
    if names.len() < tail + 1 {
        return Err(parse_err(line, format!("header has {} columns, need at least {}", names.len(), tail + 1)));
    }
    let d = names.len() - tail;
    for (j, name) in names[..d].iter().enumerate() {
        if *name != format!("x{}", j + 1) {
            return Err(parse_err(line, format!("column {} should be `x{}`, found `{name}`", j + 1, j + 1)));
        }
    }
    if names[d] != "t" || (with_z && names[d + 1] != "z") {
        let expected = if with_z { "t,z" } else { "t" };
        return Err(parse_err(line, format!("header must end with `{expected}`")));
    }

    let mut rows = Vec::new();
    let mut last_line = line;
    for record in records {
        let record = record?;
        let line = line_of(&record);
        last_line = line;
        if record.len() != names.len() {
            return Err(parse_err(
                line,
                format!("expected {} fields, found {}", names.len(), record.len()),
            ));
        }
        let mut values = Vec::with_capacity(record.len());
        for (field, name) in record.iter().zip(&names) {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(line, format!("`{field}` in column `{name}` is not a number")))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("non-finite value `{field}` in column `{name}`")));
            }
            values.push(v);
        }
        let t = values[d];
        if !(t > 0.0) {
            return Err(parse_err(line, format!("fidelity must be positive, got {t}")));
        }
        let z = if with_z { values[d + 1] } else { f64::NAN };
        values.truncate(d);
        rows.push((values, t, z));
    }
    Ok((rows, last_line))
}

pub fn read_dataset_from<R: Read>(r: R) -> Result<Dataset> {
    let (rows, last_line) = read_table(r, true)?;
    if rows.len() < 2 {
        return Err(parse_err(
            last_line,
            format!("a dataset needs at least 2 rows, found {}", rows.len()),
        ));
    }
    Dataset::from_rows(&rows)
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    read_dataset_from(BufReader::new(File::open(path)?))
}

pub fn read_sites_from<R: Read>(r: R) -> Result<Vec<Site>> {
    let (rows, last_line) = read_table(r, false)?;
    if rows.is_empty() {
        return Err(parse_err(last_line, "no sites"));
    }
    Ok(rows.into_iter().map(|(x, t, _)| Site::new(x, t)).collect())
}

pub fn read_sites(path: &Path) -> Result<Vec<Site>> {
    read_sites_from(BufReader::new(File::open(path)?))
}

fn x_header(d: usize) -> Vec<String> {
    (1..=d).map(|j| format!("x{j}")).collect()
}

/// Writes `header` then one row per entry of `rows`.
fn write_rows<W: Write>(w: W, header: &[String], rows: impl Iterator<Item = Vec<f64>>) -> Result<()> {
    let mut writer = csv::Writer::from_writer(w);
    writer.write_record(header)?;
    for row in rows {
        writer.write_record(row.iter().map(|v| v.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    Ok(BufWriter::new(File::create(path)?))
}

pub fn write_dataset_to<W: Write>(w: W, ds: &Dataset) -> Result<()> {
    let mut header = x_header(ds.dim());
    header.extend(["t".to_string(), "z".to_string()]);
    write_rows(
        w,
        &header,
        (0..ds.len()).map(|i| {
            let mut row = ds.input_row(i);
            row.extend([ds.fidelities()[i], ds.outputs()[i]]);
            row
        }),
    )
}

pub fn write_dataset(path: &Path, ds: &Dataset) -> Result<()> {
    write_dataset_to(create(path)?, ds)
}

pub fn write_sites_to<W: Write>(w: W, sites: &[Site]) -> Result<()> {
    let d = sites.first().map(|s| s.x.len()).unwrap_or(0);
    let mut header = x_header(d);
    header.push("t".into());
    write_rows(
        w,
        &header,
        sites.iter().map(|s| {
            let mut row = s.x.clone();
            row.push(s.t);
            row
        }),
    )
}

pub fn write_sites(path: &Path, sites: &[Site]) -> Result<()> {
    write_sites_to(create(path)?, sites)
}

/// Leave-one-out table: the data columns followed by the LOO posterior.
pub fn write_loo(path: &Path, ds: &Dataset, loo: &[LooEntry]) -> Result<()> {
    let mut header = x_header(ds.dim());
    header.extend(
        ["t", "z", "mean", "variance_latent", "variance_observation", "residual"]
            .map(String::from),
    );
    write_rows(
        create(path)?,
        &header,
        loo.iter().enumerate().map(|(i, e)| {
            let mut row = ds.input_row(i);
            row.extend([
                ds.fidelities()[i],
                ds.outputs()[i],
                e.mean,
                e.variance_latent,
                e.variance_observation,
                e.residual,
            ]);
            row
        }),
    )
}

pub fn write_predictions(path: &Path, sites: &[Site], pred: &PredictionResult) -> Result<()> {
    let d = sites.first().map(|s| s.x.len()).unwrap_or(0);
    let mut header = x_header(d);
    header.extend(["t", "mean", "variance_latent"].map(String::from));
    if pred.variance_observation.is_some() {
        header.push("variance_observation".into());
    }
    write_rows(
        create(path)?,
        &header,
        sites.iter().enumerate().map(|(i, s)| {
            let mut row = s.x.clone();
            row.extend([s.t, pred.mean[i], pred.variance_latent[i]]);
            if let Some(v) = &pred.variance_observation {
                row.push(v[i]);
            }
            row
        }),
    )
}

pub fn write_p_samples(path: &Path, result: &ExceedanceResult) -> Result<()> {
    write_rows(
        create(path)?,
        &["replicate".to_string(), "p".to_string()],
        result.p_samples.iter().enumerate().map(|(i, p)| vec![i as f64, *p]),
    )
}

/// `x,density` rows; a point mass is written as a single row with an
/// infinite density.
pub fn write_density(path: &Path, curve: &DensityCurve, x_name: &str) -> Result<()> {
    let header = [x_name.to_string(), "density".to_string()];
    match curve {
        DensityCurve::Curve { grid, density, .. } => write_rows(
            create(path)?,
            &header,
            grid.iter().zip(density).map(|(g, v)| vec![*g, *v]),
        ),
        DensityCurve::PointMass { at } => write_rows(create(path)?, &header, std::iter::once(vec![*at, f64::INFINITY])),
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

/// Noise variance of one level; `None` is a noiseless level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseEntry {
    pub level: f64,
    pub log_variance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataDocument {
    pub inputs: Vec<Vec<f64>>,
    pub fidelities: Vec<f64>,
    pub outputs: Vec<f64>,
}

impl DataDocument {
    pub fn from_dataset(ds: &Dataset) -> Self {
        DataDocument {
            inputs: (0..ds.len()).map(|i| ds.input_row(i)).collect(),
            fidelities: ds.fidelities().to_vec(),
            outputs: ds.outputs().iter().copied().collect(),
        }
    }

    pub fn to_dataset(&self) -> Result<Dataset> {
        let n = self.inputs.len();
        let d = self.inputs.first().map(|r| r.len()).unwrap_or(0);
        if self.inputs.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidDataset("ragged input rows".into()));
        }
        let inputs = DMatrix::from_fn(n, d, |i, j| self.inputs[i][j]);
        Dataset::new(inputs, self.fidelities.clone(), self.outputs.clone())
    }
}

/// A fitted model as persisted by `fit`: everything needed to rebuild the
/// predictor, plus provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub schema_version: u32,
    pub variant: ModelVariant,
    pub kernel: KernelSpec,
    /// Keyed by the canonical level string.
    pub noise: BTreeMap<String, NoiseEntry>,
    pub gls_mean: f64,
    pub objective: f64,
    pub parameter_names: Vec<String>,
    pub theta: Vec<f64>,
    pub prior: LambdaPrior,
    pub report: OptimizationReport,
    pub config: RunConfig,
    pub data: DataDocument,
}

impl ModelDocument {
    pub fn from_fit(fit: &MapFit, config: &RunConfig) -> Self {
        let noise = fit
            .model
            .noise()
            .entries()
            .iter()
            .map(|&(level, lv)| {
                let entry = NoiseEntry {
                    level,
                    log_variance: lv.is_finite().then_some(lv),
                };
                (level_key(level), entry)
            })
            .collect();
        ModelDocument {
            schema_version: SCHEMA_VERSION,
            variant: fit.model.kernel().variant(),
            kernel: fit.model.kernel().clone(),
            noise,
            gls_mean: fit.model.gls_mean(),
            objective: fit.objective,
            parameter_names: fit.layout.names(),
            theta: fit.theta.clone(),
            prior: fit.prior.clone(),
            report: fit.report.clone(),
            config: config.clone(),
            data: DataDocument::from_dataset(fit.model.dataset()),
        }
    }

    pub fn noise_model(&self) -> Result<NoiseModel> {
        NoiseModel::new(
            self.noise
                .values()
                .map(|e| (e.level, e.log_variance.unwrap_or(f64::NEG_INFINITY))),
        )
    }

    /// Rebuilds the predictor from the stored data and hyperparameters.
    pub fn to_model(&self) -> Result<FittedModel> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported model schema version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        FittedModel::new(self.data.to_dataset()?, self.kernel.clone(), self.noise_model()?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }
}
