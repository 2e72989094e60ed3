//! Fixtures shared by the benchmarks.

use mfgp::designs::DesignSpec;
use mfgp::inference::PriorSettings;
use mfgp::{Dataset, LambdaPrior, ModelVariant, ParameterLayout, Smoothness, SyntheticTruth};

/// Synthetic nested design with `scale` times (27, 9, 3, 1) runs in 8-D.
pub fn nested_dataset(scale: usize, seed: u64) -> Dataset {
    let mut spec = DesignSpec::fire_multi_fidelity(8, seed);
    spec.counts = [27, 9, 3, 1].iter().map(|c| c * scale).collect();
    let sites = spec.generate().expect("valid design");
    SyntheticTruth::default().simulate(&sites, seed).expect("sites in box")
}

/// Layout, prior and a plausible parameter vector for `ds`.
pub fn two_scale_point(ds: &Dataset) -> (ParameterLayout, LambdaPrior, Vec<f64>) {
    let layout = ParameterLayout::for_dataset(ds, ModelVariant::TwoScale, Smoothness::FiveHalves);
    let prior = PriorSettings::default().build(ds).expect("non-constant outputs");
    let mut theta = vec![40f64.ln()];
    theta.extend([0.5f64; 8].iter().map(|v| v.ln()));
    theta.push(5f64.ln());
    theta.extend([0.5f64; 8].iter().map(|v| v.ln()));
    theta.push(1.6f64.ln());
    theta.extend(layout.levels.iter().map(|_| 0.5f64.ln()));
    (layout, prior, theta)
}
