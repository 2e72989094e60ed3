//! Experimental designs: Latin hypercubes, nested multi-fidelity designs
//! and the run-cost model used to compare computational budgets.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{same_level, Site};
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Purpose};

/// Hours per simulator run at each fidelity level.
#[derive(Debug, Clone, PartialEq)]
pub struct CostTable {
    entries: Vec<(f64, f64)>,
}

impl CostTable {
    pub fn new(entries: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut entries: Vec<(f64, f64)> = entries.into_iter().collect();
        for &(t, c) in &entries {
            if !(t > 0.0) {
                return Err(Error::NonPositiveFidelity(t));
            }
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::InvalidParameter {
                    name: format!("cost[{t}]"),
                    value: c,
                });
            }
        }
        entries.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(CostTable { entries })
    }

    /// Approximate durations of one fire-simulator run by mesh size (cm).
    pub fn fire_simulator() -> Self {
        CostTable {
            entries: vec![
                (20.0, 54.0),
                (25.0, 20.0),
                (100.0 / 3.0, 6.0),
                (50.0, 1.0),
                (100.0, 1.0 / 12.0),
            ],
        }
    }

    pub fn cost(&self, t: f64) -> Option<f64> {
        self.entries
            .iter()
            .find(|(lt, _)| same_level(*lt, t))
            .map(|e| e.1)
    }

    pub fn entries(&self) -> &[(f64, f64)] {
        &self.entries
    }
}

/// Total hours needed to run every site of a design.
pub fn design_cost(design: &[Site], costs: &CostTable) -> Result<f64> {
    design
        .iter()
        .map(|s| costs.cost(s.t).ok_or(Error::UnknownLevel(s.t)))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DesignKind {
    #[default]
    Nested,
    Lhs,
}

/// What to generate.  For [`DesignKind::Lhs`] `levels` and `counts` hold a
/// single entry.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSpec {
    pub kind: DesignKind,
    pub levels: Vec<f64>,
    pub counts: Vec<usize>,
    pub bounds: Vec<(f64, f64)>,
    pub seed: u64,
}

impl DesignSpec {
    /// The multi-fidelity design 270/90/30/10 on mesh sizes 100/50/33.3/25.
    pub fn fire_multi_fidelity(dim: usize, seed: u64) -> Self {
        DesignSpec {
            kind: DesignKind::Nested,
            levels: vec![100.0, 50.0, 100.0 / 3.0, 25.0],
            counts: vec![270, 90, 30, 10],
            bounds: vec![(0.0, 1.0); dim],
            seed,
        }
    }

    /// The 100-run Latin hypercube at the 20 cm mesh.
    pub fn fire_high_fidelity(dim: usize, seed: u64) -> Self {
        DesignSpec {
            kind: DesignKind::Lhs,
            levels: vec![20.0],
            counts: vec![100],
            bounds: vec![(0.0, 1.0); dim],
            seed,
        }
    }

    pub fn generate(&self) -> Result<Vec<Site>> {
        match self.kind {
            DesignKind::Nested => nested_design(self),
            DesignKind::Lhs => {
                if self.levels.len() != 1 || self.counts.len() != 1 {
                    return Err(Error::InvalidDesign(
                        "a Latin hypercube design has exactly one level and one count".into(),
                    ));
                }
                let x = lhs(self.counts[0], &self.bounds, self.seed)?;
                Ok(rows_to_sites(&x, self.levels[0]))
            }
        }
    }
}

fn rows_to_sites(x: &DMatrix<f64>, t: f64) -> Vec<Site> {
    x.row_iter()
        .map(|r| Site::new(r.iter().copied().collect(), t))
        .collect()
}

fn check_box(bounds: &[(f64, f64)]) -> Result<()> {
    if bounds.is_empty() {
        return Err(Error::InvalidDesign("empty box".into()));
    }
    for (j, &(lo, hi)) in bounds.iter().enumerate() {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidDesign(format!(
                "coordinate {j}: bounds [{lo}, {hi}] are not a finite interval"
            )));
        }
    }
    Ok(())
}

/// Latin hypercube of `n` points in `bounds` drawn from `rng`.
pub fn lhs_with_rng<R: Rng + ?Sized>(
    n: usize,
    bounds: &[(f64, f64)],
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    check_box(bounds)?;
    if n == 0 {
        return Err(Error::InvalidDesign("a design needs at least one point".into()));
    }
    let mut x = DMatrix::zeros(n, bounds.len());
    let mut strata: Vec<usize> = (0..n).collect();
    for (j, &(lo, hi)) in bounds.iter().enumerate() {
        strata.shuffle(rng);
        for (i, &s) in strata.iter().enumerate() {
            let u: f64 = rng.random();
            x[(i, j)] = lo + (hi - lo) * (s as f64 + u) / n as f64;
        }
    }
    Ok(x)
}

/// Latin hypercube of `n` points in `bounds`; deterministic given `seed`.
pub fn lhs(n: usize, bounds: &[(f64, f64)], seed: u64) -> Result<DMatrix<f64>> {
    let mut rng = stream_rng(seed, Purpose::Design, 0);
    lhs_with_rng(n, bounds, &mut rng)
}

/// Greedy maximin subset of `candidates` (row indices into `x`), distances
/// normalized by the box widths.  The first pick is the candidate nearest
/// the box centre; ties go to the lowest index.  Returned indices are sorted.
fn maximin_subset(x: &DMatrix<f64>, candidates: &[usize], k: usize, bounds: &[(f64, f64)]) -> Vec<usize> {
    let dist2 = |a: &[f64], b: &[f64]| -> f64 {
        a.iter()
            .zip(b)
            .zip(bounds)
            .map(|((p, q), (lo, hi))| ((p - q) / (hi - lo)).powi(2))
            .sum()
    };
    let rows: Vec<Vec<f64>> = candidates
        .iter()
        .map(|&i| x.row(i).iter().copied().collect())
        .collect();
    let centre: Vec<f64> = bounds.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect();

    let mut first = 0;
    let mut best = f64::INFINITY;
    for (c, r) in rows.iter().enumerate() {
        let d = dist2(r, &centre);
        if d < best {
            best = d;
            first = c;
        }
    }
    let mut chosen = vec![first];
    let mut min_d: Vec<f64> = rows.iter().map(|r| dist2(r, &rows[first])).collect();
    while chosen.len() < k {
        let mut pick = usize::MAX;
        let mut far = -1.0;
        for (c, &d) in min_d.iter().enumerate() {
            if !chosen.contains(&c) && d > far {
                far = d;
                pick = c;
            }
        }
        chosen.push(pick);
        for (c, r) in rows.iter().enumerate() {
            min_d[c] = min_d[c].min(dist2(r, &rows[pick]));
        }
    }
    let mut out: Vec<usize> = chosen.into_iter().map(|c| candidates[c]).collect();
    out.sort_unstable();
    out
}

/// Nested multi-fidelity design, coarsest level first.
///
/// A Latin hypercube with the largest count is placed on the coarsest level;
/// each finer level takes a greedy maximin subset of the next coarser one.
/// Levels with a zero count are allowed at the fine end and get no rows.
pub fn nested_design(spec: &DesignSpec) -> Result<Vec<Site>> {
    if spec.levels.is_empty() || spec.levels.len() != spec.counts.len() {
        return Err(Error::InvalidDesign(format!(
            "{} levels but {} counts",
            spec.levels.len(),
            spec.counts.len()
        )));
    }
    let mut order: Vec<usize> = (0..spec.levels.len()).collect();
    // Coarsest (largest t) first.
    order.sort_by(|&a, &b| spec.levels[b].total_cmp(&spec.levels[a]));
    for w in order.windows(2) {
        let (t0, t1) = (spec.levels[w[0]], spec.levels[w[1]]);
        if same_level(t0, t1) {
            return Err(Error::InvalidDesign(format!("level {t0} listed twice")));
        }
        let (c0, c1) = (spec.counts[w[0]], spec.counts[w[1]]);
        let ok = if c0 == 0 { c1 == 0 } else { c1 < c0 };
        if !ok {
            return Err(Error::InvalidDesign(format!(
                "counts must strictly decrease towards finer levels (t = {t0}: {c0}, t = {t1}: {c1})"
            )));
        }
    }
    for &t in &spec.levels {
        if !(t > 0.0) {
            return Err(Error::NonPositiveFidelity(t));
        }
    }
    let n0 = spec.counts[order[0]];
    let x = lhs(n0, &spec.bounds, spec.seed)?;
    let mut sites = Vec::new();
    let mut current: Vec<usize> = (0..n0).collect();
    for (rank, &lvl) in order.iter().enumerate() {
        let count = spec.counts[lvl];
        if count == 0 {
            break;
        }
        if rank > 0 {
            current = maximin_subset(&x, &current, count, &spec.bounds);
        }
        for &i in &current {
            sites.push(Site::new(x.row(i).iter().copied().collect(), spec.levels[lvl]));
        }
    }
    Ok(sites)
}
