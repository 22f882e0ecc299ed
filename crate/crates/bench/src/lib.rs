//! Fixtures shared by the solver benchmarks.

use linkpred::ggm::{draw_samples, generate_pair, sample_covariance};
use linkpred::{GaussianModel, ScenarioSpec, SymmetricMatrix};

/// Prior and sample covariance for a generated scenario.
pub fn instance(dim: usize, density: f64, n_add: usize, n_remove: usize, seed: u64) -> (GaussianModel, GaussianModel, SymmetricMatrix) {
    let (prior, truth) = generate_pair(&ScenarioSpec::new(dim, density, n_add, n_remove, seed)).expect("valid scenario");
    let t_hat = sample_covariance(&draw_samples(truth.covariance(), 1000, seed).expect("PD truth"));
    (prior, truth, t_hat)
}
