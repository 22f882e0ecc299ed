//! Random instance helpers shared by unit tests, integration tests and benches.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::symmat::SymmetricMatrix;

/// Entries uniform on `[-scale, scale]`.
pub fn random_symmetric<R: Rng>(rng: &mut R, dim: usize, scale: f64) -> SymmetricMatrix {
    SymmetricMatrix::from_fn(dim, |_, _| rng.random_range(-scale..=scale))
}

/// `B Bᵀ / dim + I / 2` with standard normal `B`.
pub fn random_pd<R: Rng>(rng: &mut R, dim: usize) -> SymmetricMatrix {
    let b: Vec<Vec<f64>> = (0..dim).map(|_| (0..dim).map(|_| rng.sample(StandardNormal)).collect()).collect();
    SymmetricMatrix::from_fn(dim, |r, c| {
        let dot: f64 = (0..dim).map(|k| b[r][k] * b[c][k]).sum();
        dot / dim as f64 + if r == c { 0.5 } else { 0.0 }
    })
}
