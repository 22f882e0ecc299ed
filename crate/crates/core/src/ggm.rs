//! Zero-mean Gaussian graphical models: likelihood, divergence, sampling and
//! synthetic prior/posterior pairs with appearing or disappearing edges.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symmat::{lower_indices, Pair, SupportPattern, SymmetricMatrix};

/// Name of the generator behind every seeded draw, recorded in metadata.
pub const RNG_NAME: &str = "ChaCha8Rng";

/// Relative zero tolerance used when a model's precision is derived from
/// its covariance by inversion.
pub const MODEL_ZERO_TOL: f64 = 1e-8;

const MODEL_STREAM: u64 = 0;
const PERTURB_STREAM: u64 = 1;
const SAMPLE_STREAM: u64 = 2;

pub(crate) fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A covariance together with the exact support of its inverse.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianModel {
    covariance: SymmetricMatrix,
    precision: SymmetricMatrix,
    support: SupportPattern,
    zero_tol: f64,
}

impl GaussianModel {
    /// Builds the model from its precision matrix; the support is exact.
    pub fn from_precision(precision: SymmetricMatrix) -> Result<Self> {
        let covariance = precision.inverse()?;
        let support = precision.support(0.0);
        let zero_tol = MODEL_ZERO_TOL * precision.max_abs();
        Ok(GaussianModel { covariance, precision, support, zero_tol })
    }

    /// Builds the model from a covariance and its declared precision support.
    ///
    /// The inverse is checked against `support` at `zero_tol`, then entries
    /// outside `support` are set to exact zeros.
    pub fn from_covariance(covariance: SymmetricMatrix, support: SupportPattern, zero_tol: f64) -> Result<Self> {
        Error::check_dim(covariance.dim(), support.dim())?;
        let inv = covariance.inverse()?;
        let measured = inv.support(zero_tol);
        if measured != support {
            return Err(Error::invalid(format!(
                "declared precision support disagrees with inverse covariance at zero_tol {zero_tol:e}"
            )));
        }
        let precision = inv.project(&support)?;
        Ok(GaussianModel { covariance, precision, support, zero_tol })
    }

    pub fn dim(&self) -> usize {
        self.covariance.dim()
    }

    pub fn covariance(&self) -> &SymmetricMatrix {
        &self.covariance
    }

    pub fn precision(&self) -> &SymmetricMatrix {
        &self.precision
    }

    pub fn support(&self) -> &SupportPattern {
        &self.support
    }

    pub fn zero_tol(&self) -> f64 {
        self.zero_tol
    }
}

/// `N` i.i.d. zero-mean samples of an `m`-dimensional vector.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationSet {
    samples: Vec<Vec<f64>>,
    seed: Option<u64>,
}

impl ObservationSet {
    pub fn new(samples: Vec<Vec<f64>>, seed: Option<u64>) -> Result<Self> {
        let dim = samples.first().map(Vec::len).ok_or_else(|| Error::invalid("observation set is empty"))?;
        if dim == 0 {
            return Err(Error::invalid("observations must have at least one component"));
        }
        for x in &samples {
            Error::check_dim(dim, x.len())?;
        }
        Ok(ObservationSet { samples, seed })
    }

    pub fn dim(&self) -> usize {
        self.samples[0].len()
    }

    pub fn count(&self) -> usize {
        self.samples.len()
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }
}

fn default_magnitude() -> [f64; 2] {
    [0.2, 0.6]
}

/// Recipe for a prior model and its perturbed successor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub dim: usize,
    pub edge_density: f64,
    pub n_add: usize,
    pub n_remove: usize,
    pub seed: u64,
    /// Magnitude range of off-diagonal precision entries. Prior entries use
    /// it directly; appearing entries scale it by the prior's mean diagonal.
    #[serde(default = "default_magnitude")]
    pub edge_magnitude: [f64; 2],
}

impl ScenarioSpec {
    pub fn new(dim: usize, edge_density: f64, n_add: usize, n_remove: usize, seed: u64) -> Self {
        ScenarioSpec { dim, edge_density, n_add, n_remove, seed, edge_magnitude: default_magnitude() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::invalid("scenario needs at least 2 nodes"));
        }
        if !(self.edge_density > 0.0 && self.edge_density <= 1.0) {
            return Err(Error::invalid("edge_density must lie in (0, 1]"));
        }
        let [lo, hi] = self.edge_magnitude;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::invalid("edge_magnitude must satisfy 0 < lo <= hi"));
        }
        Ok(())
    }
}

/// `(1/N) Σ x xᵀ`.
pub fn sample_covariance(obs: &ObservationSet) -> SymmetricMatrix {
    let n = obs.count() as f64;
    let dim = obs.dim();
    let mut acc = vec![0.0; dim * (dim + 1) / 2];
    for x in obs.samples() {
        for (slot, (r, c)) in acc.iter_mut().zip(lower_indices(dim)) {
            *slot += x[r] * x[c];
        }
    }
    SymmetricMatrix::from_packed(dim, acc.into_iter().map(|v| v / n).collect()).expect("packed length")
}

/// `D(T‖S) = ½[−log det(S⁻¹T) + tr(S⁻¹T) − m]`, the divergence of `N(0,T)`
/// from `N(0,S)`.
pub fn kl_divergence(t: &SymmetricMatrix, s: &SymmetricMatrix) -> Result<f64> {
    Error::check_dim(s.dim(), t.dim())?;
    let chol_t = t.cholesky()?;
    let chol_s = s.cholesky()?;
    let trace = chol_s.inverse().trace_product(t);
    let value = 0.5 * (chol_s.log_det() - chol_t.log_det() + trace - t.dim() as f64);
    Ok(value.max(0.0))
}

/// Per-sample negative log-likelihood without constants:
/// `log det Σ + tr(Σ̂ Σ⁻¹)`.
pub fn negative_log_likelihood(sigma: &SymmetricMatrix, sigma_hat: &SymmetricMatrix) -> Result<f64> {
    Error::check_dim(sigma.dim(), sigma_hat.dim())?;
    let chol = sigma.cholesky()?;
    Ok(chol.log_det() + sigma_hat.trace_product(&chol.inverse()))
}

/// `N` draws `L z` with `L Lᵀ = T` and standard normal `z`.
pub fn draw_samples(t: &SymmetricMatrix, n: usize, seed: u64) -> Result<ObservationSet> {
    if n == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    let chol = t.cholesky()?;
    let mut rng = seeded_rng(seed, SAMPLE_STREAM);
    let samples = (0..n)
        .map(|_| {
            let z: Vec<f64> = (0..t.dim()).map(|_| rng.sample(StandardNormal)).collect();
            chol.lower_mul(&z)
        })
        .collect();
    ObservationSet::new(samples, Some(seed))
}

fn random_magnitude<R: Rng>(rng: &mut R, [lo, hi]: [f64; 2]) -> f64 {
    let m = if hi > lo { rng.random_range(lo..hi) } else { lo };
    if rng.random::<bool>() {
        m
    } else {
        -m
    }
}

fn row_abs_sums(k: &SymmetricMatrix) -> Vec<f64> {
    (0..k.dim()).map(|r| (0..k.dim()).filter(|&c| c != r).map(|c| k.get(r, c).abs()).sum()).collect()
}

/// Margin `δ = 0.1 · max row abs sum`, or 1 when there are no edges at all.
fn dominance_margin(row_sums: &[f64]) -> f64 {
    let max = row_sums.iter().cloned().fold(0.0, f64::max);
    if max > 0.0 {
        0.1 * max
    } else {
        1.0
    }
}

fn random_model_with(dim: usize, edge_density: f64, magnitude: [f64; 2], seed: u64) -> Result<GaussianModel> {
    if dim < 2 {
        return Err(Error::invalid("random model needs at least 2 nodes"));
    }
    if !(edge_density > 0.0 && edge_density <= 1.0) {
        return Err(Error::invalid("edge_density must lie in (0, 1]"));
    }
    let mut rng = seeded_rng(seed, MODEL_STREAM);
    let candidates: Vec<(usize, usize)> = lower_indices(dim).filter(|(r, c)| r != c).collect();
    let n_edges = (edge_density * candidates.len() as f64).round() as usize;
    let mut chosen: Vec<usize> = index::sample(&mut rng, candidates.len(), n_edges).into_vec();
    chosen.sort_unstable();

    let mut k = SymmetricMatrix::zeros(dim);
    for idx in chosen {
        let (r, c) = candidates[idx];
        k.set(r, c, random_magnitude(&mut rng, magnitude));
    }
    let sums = row_abs_sums(&k);
    let delta = dominance_margin(&sums);
    for (r, s) in sums.iter().enumerate() {
        k.set(r, r, s + delta);
    }
    GaussianModel::from_precision(k)
}

/// Random sparse diagonally dominant precision `K` with about
/// `edge_density · m(m−1)/2` edges; returns `K⁻¹` and the support of `K`.
pub fn random_model(dim: usize, edge_density: f64, seed: u64) -> Result<GaussianModel> {
    random_model_with(dim, edge_density, default_magnitude(), seed)
}

/// Adds `n_add` random edges outside the base support and deletes
/// `n_remove` random edges inside it, then restores diagonal dominance on
/// the rows that lost it.
pub fn perturb_model(base: &GaussianModel, spec: &ScenarioSpec) -> Result<GaussianModel> {
    Error::check_dim(base.dim(), spec.dim)?;
    let absent: Vec<Pair> = base.support().off_diagonal_complement().collect();
    let present: Vec<Pair> = base.support().off_diagonal_pairs().collect();
    if spec.n_add > absent.len() {
        return Err(Error::invalid(format!("n_add = {} exceeds {} available non-edges", spec.n_add, absent.len())));
    }
    if spec.n_remove > present.len() {
        return Err(Error::invalid(format!("n_remove = {} exceeds {} available edges", spec.n_remove, present.len())));
    }
    let mut rng = seeded_rng(spec.seed, PERTURB_STREAM);
    let mut k = base.precision().clone();
    let mean_diag = k.trace() / k.dim() as f64;
    let scaled = [spec.edge_magnitude[0] * mean_diag, spec.edge_magnitude[1] * mean_diag];

    let mut add: Vec<usize> = index::sample(&mut rng, absent.len(), spec.n_add).into_vec();
    add.sort_unstable();
    for idx in add {
        let p = absent[idx];
        k.set(p.i - 1, p.j - 1, random_magnitude(&mut rng, scaled));
    }
    let mut remove: Vec<usize> = index::sample(&mut rng, present.len(), spec.n_remove).into_vec();
    remove.sort_unstable();
    for idx in remove {
        let p = present[idx];
        k.set(p.i - 1, p.j - 1, 0.0);
    }

    let sums = row_abs_sums(&k);
    let delta = dominance_margin(&sums);
    for (r, s) in sums.iter().enumerate() {
        if k.get(r, r) <= *s {
            k.set(r, r, s + delta);
        }
    }
    GaussianModel::from_precision(k)
}

/// Prior model from `spec`, then its perturbation.
pub fn generate_pair(spec: &ScenarioSpec) -> Result<(GaussianModel, GaussianModel)> {
    spec.validate()?;
    let prior = random_model_with(spec.dim, spec.edge_density, spec.edge_magnitude, spec.seed)?;
    let truth = perturb_model(&prior, spec)?;
    Ok((prior, truth))
}

/// `‖T − T̂‖_F / ‖T‖_F`.
pub fn relative_error(t_true: &SymmetricMatrix, t_est: &SymmetricMatrix) -> Result<f64> {
    Error::check_dim(t_true.dim(), t_est.dim())?;
    let denom = t_true.frobenius_norm();
    if denom == 0.0 {
        return Err(Error::invalid("reference matrix is zero"));
    }
    Ok((t_true - t_est).frobenius_norm() / denom)
}
