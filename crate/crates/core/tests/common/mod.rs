//! Random instances shared by the integration suites.
#![allow(dead_code)]

use mfgp::designs::{DesignKind, DesignSpec};
use mfgp::{
    Dataset, KernelSpec, MaternParams, ModelVariant, NoiseModel, Site, Smoothness, SyntheticTruth,
    TemporalCorrParams,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const VARIANTS: [ModelVariant; 3] = [
    ModelVariant::TwoScale,
    ModelVariant::StationaryJoint,
    ModelVariant::SingleLevel,
];

pub fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
}

pub fn smoothness(rng: &mut ChaCha8Rng) -> Smoothness {
    [Smoothness::Half, Smoothness::ThreeHalves, Smoothness::FiveHalves][rng.random_range(0..3)]
}

fn matern(rng: &mut ChaCha8Rng, dims: usize, ls: (f64, f64), var: (f64, f64), nu: Smoothness) -> MaternParams {
    MaternParams {
        variance: log_uniform(rng, var.0, var.1),
        lengthscales: (0..dims).map(|_| log_uniform(rng, ls.0, ls.1)).collect(),
        smoothness: nu,
    }
}

/// Random kernel of `variant` on `d` inputs with lengthscales in `ls`.
pub fn random_kernel(rng: &mut ChaCha8Rng, variant: ModelVariant, d: usize, ls: (f64, f64), t_scale: f64) -> KernelSpec {
    let nu = smoothness(rng);
    match variant {
        ModelVariant::TwoScale => KernelSpec::TwoScale {
            ideal: matern(rng, d, ls, (0.1, 10.0), nu),
            error: matern(rng, d, ls, (0.01, 5.0), nu),
            temporal: TemporalCorrParams {
                exponent: rng.random_range(0.1..4.0),
                t_scale,
            },
        },
        ModelVariant::StationaryJoint => KernelSpec::StationaryJoint {
            joint: matern(rng, d + 1, ls, (0.1, 10.0), nu),
        },
        ModelVariant::SingleLevel => KernelSpec::SingleLevel {
            spatial: matern(rng, d, ls, (0.1, 10.0), nu),
        },
    }
}

/// Random dataset with `n` rows in `[0,1]^d`; levels drawn from `levels`
/// (a single level for the single-level variant).
pub fn random_dataset(rng: &mut ChaCha8Rng, variant: ModelVariant, n: usize, d: usize, levels: &[f64]) -> Dataset {
    let rows: Vec<(Vec<f64>, f64, f64)> = (0..n)
        .map(|i| {
            let x: Vec<f64> = (0..d).map(|_| rng.random()).collect();
            let t = if variant == ModelVariant::SingleLevel {
                levels[0]
            } else {
                // Keep at least two levels populated.
                levels[if i < levels.len() { i } else { rng.random_range(0..levels.len()) }]
            };
            let z = rng.random_range(-2.0..2.0) + x.iter().sum::<f64>();
            (x, t, z)
        })
        .collect();
    Dataset::from_rows(&rows).expect("valid random dataset")
}

pub fn random_noise(rng: &mut ChaCha8Rng, ds: &Dataset, lo: f64, hi: f64) -> NoiseModel {
    NoiseModel::new(ds.levels().iter().map(|l| (l.value, log_uniform(rng, lo, hi).ln()))).unwrap()
}

pub fn noiseless(ds: &Dataset) -> NoiseModel {
    NoiseModel::new(ds.levels().iter().map(|l| (l.value, f64::NEG_INFINITY))).unwrap()
}

pub fn random_sites(rng: &mut ChaCha8Rng, m: usize, d: usize, levels: &[f64]) -> Vec<Site> {
    (0..m)
        .map(|_| {
            let x = (0..d).map(|_| rng.random()).collect();
            Site::new(x, levels[rng.random_range(0..levels.len())])
        })
        .collect()
}

/// Levels of the scaled multi-fidelity benchmark design, coarsest first.
pub fn benchmark_levels() -> Vec<f64> {
    vec![100.0, 50.0, 100.0 / 3.0, 25.0]
}

/// Nested (135, 45, 15, 5) design on the benchmark simulator.
pub fn benchmark_dataset(seed: u64) -> Dataset {
    let spec = DesignSpec {
        kind: DesignKind::Nested,
        levels: benchmark_levels(),
        counts: vec![135, 45, 15, 5],
        bounds: vec![(0.0, 1.0); 8],
        seed,
    };
    SyntheticTruth::default()
        .simulate(&spec.generate().unwrap(), seed)
        .unwrap()
}

/// Held-out Latin hypercube of `n` sites at fidelity `t`.
pub fn holdout(n: usize, t: f64, seed: u64) -> Vec<Site> {
    DesignSpec {
        kind: DesignKind::Lhs,
        levels: vec![t],
        counts: vec![n],
        bounds: vec![(0.0, 1.0); 8],
        seed,
    }
    .generate()
    .unwrap()
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn sd(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)).sqrt()
}

pub fn squared_correlation(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov * cov / (va * vb)
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
