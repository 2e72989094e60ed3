//! Training data and fidelity levels.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Two fidelity values closer than this denote the same level.
pub const LEVEL_TOLERANCE: f64 = 1e-6;

/// Canonical textual key of a fidelity level, rounded to 1e-6.
pub fn level_key(t: f64) -> String {
    format!("{:.6}", t)
}

/// Whether two fidelity values denote the same level.
#[inline]
pub fn same_level(a: f64, b: f64) -> bool {
    (a - b).abs() <= LEVEL_TOLERANCE
}

/// A distinct fidelity level and how many rows sit on it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Level {
    pub value: f64,
    pub count: usize,
}

/// Groups fidelity values into sorted distinct levels.
pub fn group_levels(fidelities: &[f64]) -> Vec<Level> {
    let mut sorted: Vec<f64> = fidelities.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut levels: Vec<Level> = Vec::new();
    for t in sorted {
        match levels.last_mut() {
            Some(last) if same_level(last.value, t) => last.count += 1,
            _ => levels.push(Level { value: t, count: 1 }),
        }
    }
    levels
}

/// A site `(x, t)` in input-by-fidelity space.
#[derive(Debug, Clone, PartialEq)]
pub struct Site {
    pub x: Vec<f64>,
    pub t: f64,
}

impl Site {
    pub fn new(x: Vec<f64>, t: f64) -> Self {
        Site { x, t }
    }
}

/// Observations `(x_i, t_i, z_i)` of a stochastic simulator.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: DMatrix<f64>,
    fidelities: Vec<f64>,
    outputs: DVector<f64>,
    levels: Vec<Level>,
}

impl Dataset {
    pub fn new(inputs: DMatrix<f64>, fidelities: Vec<f64>, outputs: Vec<f64>) -> Result<Self> {
        let n = inputs.nrows();
        if fidelities.len() != n || outputs.len() != n {
            return Err(Error::InvalidDataset(format!(
                "{} input rows, {} fidelities, {} outputs",
                n,
                fidelities.len(),
                outputs.len()
            )));
        }
        if n < 2 {
            return Err(Error::NotEnoughPoints { needed: 2, found: n });
        }
        if inputs.ncols() == 0 {
            return Err(Error::InvalidDataset("inputs have no columns".into()));
        }
        for i in 0..n {
            if inputs.row(i).iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidDataset(format!("row {i}: non-finite input")));
            }
            if !fidelities[i].is_finite() || fidelities[i] <= 0.0 {
                return Err(Error::InvalidDataset(format!(
                    "row {i}: fidelity must be positive and finite, got {}",
                    fidelities[i]
                )));
            }
            if !outputs[i].is_finite() {
                return Err(Error::InvalidDataset(format!("row {i}: non-finite output")));
            }
        }
        let levels = group_levels(&fidelities);
        Ok(Dataset {
            inputs,
            fidelities,
            outputs: DVector::from_vec(outputs),
            levels,
        })
    }

    /// Builds a dataset from row vectors.
    pub fn from_rows(rows: &[(Vec<f64>, f64, f64)]) -> Result<Self> {
        let d = rows.first().map(|r| r.0.len()).unwrap_or(0);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.0.len() != d) {
            return Err(Error::InvalidDataset(format!(
                "row {i} has {} inputs, expected {d}",
                r.0.len()
            )));
        }
        let inputs = DMatrix::from_fn(rows.len(), d, |i, j| rows[i].0[j]);
        Dataset::new(
            inputs,
            rows.iter().map(|r| r.1).collect(),
            rows.iter().map(|r| r.2).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn inputs(&self) -> &DMatrix<f64> {
        &self.inputs
    }

    pub fn fidelities(&self) -> &[f64] {
        &self.fidelities
    }

    pub fn outputs(&self) -> &DVector<f64> {
        &self.outputs
    }

    /// Sorted distinct levels, finest (smallest `t`) first.
    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn level_index(&self, t: f64) -> Option<usize> {
        self.levels.iter().position(|l| same_level(l.value, t))
    }

    pub fn input_row(&self, i: usize) -> Vec<f64> {
        self.inputs.row(i).iter().copied().collect()
    }

    pub fn site(&self, i: usize) -> Site {
        Site::new(self.input_row(i), self.fidelities[i])
    }

    pub fn sites(&self) -> Vec<Site> {
        (0..self.len()).map(|i| self.site(i)).collect()
    }

    /// Range `max - min` of the outputs.
    pub fn output_range(&self) -> f64 {
        self.outputs.max() - self.outputs.min()
    }

    /// Per-coordinate `(min, max)` of the inputs.
    pub fn input_bounds(&self) -> Vec<(f64, f64)> {
        (0..self.dim())
            .map(|j| {
                let c = self.inputs.column(j);
                (c.min(), c.max())
            })
            .collect()
    }

    /// A copy with the outputs replaced.
    pub fn with_outputs(&self, outputs: Vec<f64>) -> Result<Self> {
        Dataset::new(self.inputs.clone(), self.fidelities.clone(), outputs)
    }

    /// A copy without row `i`.
    pub fn without_row(&self, i: usize) -> Result<Self> {
        let keep: Vec<usize> = (0..self.len()).filter(|&k| k != i).collect();
        self.select_rows(&keep)
    }

    /// Rows in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let inputs = DMatrix::from_fn(rows.len(), self.dim(), |r, j| self.inputs[(rows[r], j)]);
        Dataset::new(
            inputs,
            rows.iter().map(|&r| self.fidelities[r]).collect(),
            rows.iter().map(|&r| self.outputs[r]).collect(),
        )
    }

    /// Rows on the given level.
    pub fn level_subset(&self, t: f64) -> Result<Self> {
        let rows: Vec<usize> = (0..self.len())
            .filter(|&i| same_level(self.fidelities[i], t))
            .collect();
        self.select_rows(&rows)
    }
}
