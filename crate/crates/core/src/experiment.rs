//! Scenario artifacts, the fit pipeline and regularization sweeps.
//!
//! A scenario directory holds
//!
//! | file               | content                                   |
//! |--------------------|-------------------------------------------|
//! | `S.txt`            | prior covariance (matrix format)          |
//! | `S_precision.txt`  | prior precision, exact zeros              |
//! | `omega_s.txt`      | prior precision support (support format)  |
//! | `T.txt`            | true covariance (optional)                |
//! | `T_precision.txt`  | true precision (optional)                 |
//! | `omega_t.txt`      | true precision support (optional)         |
//! | `observations.csv` | one sample per row                        |
//! | `metadata.json`    | seed, generator, sample count, recipe     |

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ggm::{self, draw_samples, generate_pair, relative_error, sample_covariance, GaussianModel, ObservationSet, ScenarioSpec};
use crate::io;
use crate::predict::{score_from_precision, threshold_support, PredictionReport, ScoreMatrix, ScoreVariant, DEFAULT_SCORE_THRESHOLD};
use crate::solver::{solve, PenaltySpec, SolveResult, SolverConfig};
use crate::symmat::{Pair, SupportPattern};

pub const SWEEP_CSV_VERSION: u32 = 1;
pub const METADATA_VERSION: u32 = 1;

pub const DEFAULT_PLP_GRID: [f64; 7] = [0.01, 0.02, 0.05, 0.08, 0.1, 0.2, 0.5];
pub const DEFAULT_NLP_GRID: [f64; 7] = [0.05, 0.1, 0.15, 0.26, 0.5, 1.0, 2.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyKind {
    Plp,
    Nlp,
    Mixed,
    Known,
}

impl PenaltyKind {
    pub fn name(self) -> &'static str {
        match self {
            PenaltyKind::Plp => "plp",
            PenaltyKind::Nlp => "nlp",
            PenaltyKind::Mixed => "mixed",
            PenaltyKind::Known => "known",
        }
    }

    pub fn default_grid(self) -> Vec<GammaPoint> {
        match self {
            PenaltyKind::Plp => DEFAULT_PLP_GRID.iter().map(|&g| GammaPoint::Single(g)).collect(),
            PenaltyKind::Nlp => DEFAULT_NLP_GRID.iter().map(|&g| GammaPoint::Single(g)).collect(),
            PenaltyKind::Mixed => {
                let mut grid = Vec::new();
                for &p in &[0.02, 0.08, 0.2] {
                    for &n in &[0.1, 0.26, 0.5] {
                        grid.push(GammaPoint::Pair([p, n]));
                    }
                }
                grid
            }
            PenaltyKind::Known => Vec::new(),
        }
    }

    /// Builds the penalty for one grid point. `Known` takes its support from
    /// `known_support` and ignores `gamma`.
    pub fn penalty(self, gamma: Option<GammaPoint>, known_support: Option<&SupportPattern>) -> Result<PenaltySpec> {
        let need = |g: Option<GammaPoint>| g.ok_or_else(|| Error::invalid(format!("{} needs a regularization weight", self.name())));
        match self {
            PenaltyKind::Plp => Ok(PenaltySpec::plp(need(gamma)?.single()?)),
            PenaltyKind::Nlp => Ok(PenaltySpec::nlp(need(gamma)?.single()?)),
            PenaltyKind::Mixed => {
                let [p, n] = need(gamma)?.pair()?;
                Ok(PenaltySpec::mixed(p, n))
            }
            PenaltyKind::Known => known_support
                .cloned()
                .map(PenaltySpec::known_support)
                .ok_or_else(|| Error::invalid("known-support fit needs a support pattern")),
        }
    }
}

impl std::str::FromStr for PenaltyKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plp" => Ok(PenaltyKind::Plp),
            "nlp" => Ok(PenaltyKind::Nlp),
            "mixed" => Ok(PenaltyKind::Mixed),
            "known" => Ok(PenaltyKind::Known),
            other => Err(Error::invalid(format!("unknown penalty kind {other:?}"))),
        }
    }
}

/// One regularization setting: `γ` for PLP/NLP, `(η_P, η_N)` for mixed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GammaPoint {
    Single(f64),
    Pair([f64; 2]),
}

impl GammaPoint {
    pub fn single(self) -> Result<f64> {
        match self {
            GammaPoint::Single(g) => Ok(g),
            GammaPoint::Pair(_) => Err(Error::invalid("expected a single regularization weight")),
        }
    }

    pub fn pair(self) -> Result<[f64; 2]> {
        match self {
            GammaPoint::Pair(p) => Ok(p),
            GammaPoint::Single(_) => Err(Error::invalid("mixed penalty needs an (eta_p, eta_n) pair")),
        }
    }

    fn values(self) -> Vec<f64> {
        match self {
            GammaPoint::Single(g) => vec![g],
            GammaPoint::Pair(p) => p.to_vec(),
        }
    }

    fn csv_cells(self) -> (String, String) {
        match self {
            GammaPoint::Single(g) => (format!("{g}"), String::new()),
            GammaPoint::Pair([p, n]) => (format!("{p}"), format!("{n}")),
        }
    }
}

impl std::fmt::Display for GammaPoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GammaPoint::Single(g) => write!(f, "{g}"),
            GammaPoint::Pair([p, n]) => write!(f, "{p},{n}"),
        }
    }
}

fn default_n() -> usize {
    1000
}
fn default_t_r() -> f64 {
    DEFAULT_SCORE_THRESHOLD
}
fn default_seeds() -> Vec<u64> {
    (0..20).collect()
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioSpec,
    #[serde(rename = "N", default = "default_n")]
    pub n_samples: usize,
    pub penalty_kind: PenaltyKind,
    /// Absent means the default grid of `penalty_kind`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_grid: Option<Vec<GammaPoint>>,
    #[serde(default = "default_t_r")]
    pub t_r: f64,
    #[serde(default)]
    pub score_variant: ScoreVariant,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    /// Ten nodes, dense prior, 1000 samples, three appearing edges.
    pub fn plp_reference() -> Self {
        ExperimentConfig {
            scenario: ScenarioSpec::new(10, 0.7, 3, 0, 0),
            n_samples: 1000,
            penalty_kind: PenaltyKind::Plp,
            gamma_grid: None,
            t_r: DEFAULT_SCORE_THRESHOLD,
            score_variant: ScoreVariant::PartialCorrelation,
            seeds: default_seeds(),
            solver: SolverConfig::default(),
            output_dir: default_output_dir(),
        }
    }

    /// Ten nodes, sparse prior, 1000 samples, three disappearing edges.
    pub fn nlp_reference() -> Self {
        ExperimentConfig {
            scenario: ScenarioSpec::new(10, 0.2, 0, 3, 0),
            penalty_kind: PenaltyKind::Nlp,
            ..Self::plp_reference()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn grid(&self) -> Vec<GammaPoint> {
        self.gamma_grid.clone().unwrap_or_else(|| self.penalty_kind.default_grid())
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.solver.validate()?;
        if self.n_samples == 0 {
            return Err(Error::invalid("N must be at least 1"));
        }
        if !(self.t_r > 0.0) {
            return Err(Error::invalid("t_r must be positive"));
        }
        if self.seeds.is_empty() {
            return Err(Error::invalid("seeds must not be empty"));
        }
        validate_grid(self.penalty_kind, &self.grid())
    }
}

pub fn validate_grid(kind: PenaltyKind, grid: &[GammaPoint]) -> Result<()> {
    if kind == PenaltyKind::Known {
        return Ok(());
    }
    if grid.is_empty() {
        return Err(Error::invalid("gamma_grid must not be empty"));
    }
    for g in grid {
        if g.values().iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::invalid(format!("gamma_grid entry {g} is not strictly positive")));
        }
        match (kind, g) {
            (PenaltyKind::Mixed, GammaPoint::Single(_)) => return Err(Error::invalid("mixed grid entries must be pairs")),
            (PenaltyKind::Plp | PenaltyKind::Nlp, GammaPoint::Pair(_)) => {
                return Err(Error::invalid("plp/nlp grid entries must be single values"))
            }
            _ => {}
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Metadata {
    format_version: u32,
    dim: usize,
    seed: u64,
    rng: String,
    n_samples: usize,
    zero_tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scenario: Option<ScenarioSpec>,
    #[serde(default)]
    appearing: Vec<Pair>,
    #[serde(default)]
    disappearing: Vec<Pair>,
}

/// Prior model, optional ground truth and the observations drawn from it.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub spec: Option<ScenarioSpec>,
    pub seed: u64,
    pub n_samples: usize,
    pub prior: GaussianModel,
    pub truth: Option<GaussianModel>,
    pub observations: ObservationSet,
}

impl Scenario {
    pub fn generate(spec: &ScenarioSpec, n_samples: usize) -> Result<Self> {
        let (prior, truth) = generate_pair(spec)?;
        let observations = draw_samples(truth.covariance(), n_samples, spec.seed)?;
        Ok(Scenario { spec: Some(spec.clone()), seed: spec.seed, n_samples, prior, truth: Some(truth), observations })
    }

    /// Observations for `seed`: the stored ones for the scenario's own seed,
    /// a fresh draw from the true covariance otherwise.
    pub fn observations_for_seed(&self, seed: u64) -> Result<ObservationSet> {
        if seed == self.seed {
            return Ok(self.observations.clone());
        }
        let truth = self.truth.as_ref().ok_or_else(|| Error::invalid("redrawing observations needs the true model"))?;
        draw_samples(truth.covariance(), self.n_samples, seed)
    }

    pub fn appearing(&self) -> Vec<Pair> {
        self.truth.as_ref().map(|t| t.support().difference(self.prior.support()).off_diagonal_pairs().collect()).unwrap_or_default()
    }

    pub fn disappearing(&self) -> Vec<Pair> {
        self.truth.as_ref().map(|t| self.prior.support().difference(t.support()).off_diagonal_pairs().collect()).unwrap_or_default()
    }

    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        io::write_matrix(&dir.join("S.txt"), self.prior.covariance(), None)?;
        io::write_matrix(&dir.join("S_precision.txt"), self.prior.precision(), None)?;
        io::write_support(&dir.join("omega_s.txt"), self.prior.support())?;
        if let Some(truth) = &self.truth {
            io::write_matrix(&dir.join("T.txt"), truth.covariance(), None)?;
            io::write_matrix(&dir.join("T_precision.txt"), truth.precision(), None)?;
            io::write_support(&dir.join("omega_t.txt"), truth.support())?;
        }
        fs::write(dir.join("observations.csv"), io::format_observations(&self.observations))?;
        let meta = Metadata {
            format_version: METADATA_VERSION,
            dim: self.prior.dim(),
            seed: self.seed,
            rng: ggm::RNG_NAME.to_string(),
            n_samples: self.n_samples,
            zero_tol: self.prior.zero_tol(),
            scenario: self.spec.clone(),
            appearing: self.appearing(),
            disappearing: self.disappearing(),
        };
        fs::write(dir.join("metadata.json"), serde_json::to_string_pretty(&meta)? + "\n")?;
        Ok(())
    }

    pub fn read_dir(dir: &Path) -> Result<Self> {
        let meta: Metadata = serde_json::from_str(&io::read_text(&dir.join("metadata.json"))?)?;
        let prior = read_model(dir, "S", "omega_s", meta.zero_tol)?
            .ok_or_else(|| Error::invalid(format!("{} has no prior model", dir.display())))?;
        let truth = read_model(dir, "T", "omega_t", meta.zero_tol)?;
        let observations = io::parse_observations(&io::read_text(&dir.join("observations.csv"))?, Some(meta.seed))?;
        Error::check_dim(prior.dim(), observations.dim())?;
        if let Some(t) = &truth {
            Error::check_dim(prior.dim(), t.dim())?;
        }
        Ok(Scenario { spec: meta.scenario, seed: meta.seed, n_samples: meta.n_samples, prior, truth, observations })
    }
}

fn read_model(dir: &Path, cov: &str, support: &str, zero_tol: f64) -> Result<Option<GaussianModel>> {
    let precision_path = dir.join(format!("{cov}_precision.txt"));
    let cov_path = dir.join(format!("{cov}.txt"));
    if precision_path.exists() {
        let model = GaussianModel::from_precision(io::read_matrix(&precision_path)?)?;
        let support_path = dir.join(format!("{support}.txt"));
        if support_path.exists() && &io::read_support(&support_path)? != model.support() {
            return Err(Error::invalid(format!("{} disagrees with {}", support_path.display(), precision_path.display())));
        }
        Ok(Some(model))
    } else if cov_path.exists() {
        let s = io::read_support(&dir.join(format!("{support}.txt")))?;
        Ok(Some(GaussianModel::from_covariance(io::read_matrix(&cov_path)?, s, zero_tol)?))
    } else {
        Ok(None)
    }
}

/// Everything one fit produces.
#[derive(Clone, Debug)]
pub struct FitOutcome {
    pub penalty: PenaltySpec,
    pub result: SolveResult,
    pub scores: ScoreMatrix,
    pub report: PredictionReport,
    pub relative_error: Option<f64>,
}

/// Solve, score, threshold and (when the truth is known) evaluate.
pub fn fit(
    prior: &GaussianModel,
    truth: Option<&GaussianModel>,
    observations: &ObservationSet,
    penalty: &PenaltySpec,
    solver: &SolverConfig,
    t_r: f64,
    variant: ScoreVariant,
) -> Result<FitOutcome> {
    let t_hat = sample_covariance(observations);
    let result = solve(prior, &t_hat, penalty, solver)?;
    let scores = score_from_precision(&result.precision, variant)?;
    let predicted = threshold_support(&scores, t_r)?;
    let mut report = PredictionReport::new(format!("kl_prior_{}", penalty.kind_name()), predicted);
    let mut rel = None;
    if let Some(t) = truth {
        report.score_against(t.support())?;
        rel = Some(relative_error(t.covariance(), &result.t_o)?);
    }
    Ok(FitOutcome { penalty: penalty.clone(), result, scores, report, relative_error: rel })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub seed: u64,
    pub gamma: GammaPoint,
    pub relative_error: f64,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub exact_recovery: bool,
    pub iterations: usize,
    pub converged: bool,
    /// Truth-free diagnostics.
    pub objective: f64,
    pub predicted_edges: usize,
}

impl SweepRow {
    fn from_outcome(seed: u64, gamma: GammaPoint, out: &FitOutcome) -> Self {
        SweepRow {
            seed,
            gamma,
            relative_error: out.relative_error.unwrap_or(f64::NAN),
            false_positives: out.report.false_positives,
            false_negatives: out.report.false_negatives,
            exact_recovery: out.report.exact_recovery(),
            iterations: out.result.iterations,
            converged: out.result.converged,
            objective: out.result.final_objective(),
            predicted_edges: out.report.predicted_support.edge_count(),
        }
    }
}

/// Fixed settings shared by every cell of a sweep.
#[derive(Clone, Debug)]
pub struct SweepSettings {
    pub kind: PenaltyKind,
    pub grid: Vec<GammaPoint>,
    pub seeds: Vec<u64>,
    pub solver: SolverConfig,
    pub t_r: f64,
    pub variant: ScoreVariant,
}

impl SweepSettings {
    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        SweepSettings {
            kind: cfg.penalty_kind,
            grid: cfg.grid(),
            seeds: cfg.seeds.clone(),
            solver: cfg.solver.clone(),
            t_r: cfg.t_r,
            variant: cfg.score_variant,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.kind == PenaltyKind::Known {
            return Err(Error::invalid("sweeps need a regularized penalty kind"));
        }
        if self.seeds.is_empty() {
            return Err(Error::invalid("seeds must not be empty"));
        }
        self.solver.validate()?;
        validate_grid(self.kind, &self.grid)
    }

    fn cells(&self) -> Vec<(u64, GammaPoint)> {
        self.seeds.iter().flat_map(|&s| self.grid.iter().map(move |&g| (s, g))).collect()
    }
}

fn run_cells<F>(settings: &SweepSettings, scenario_for: F) -> Result<Vec<SweepRow>>
where
    F: Fn(u64) -> Result<(Scenario, ObservationSet)> + Sync,
{
    settings.validate()?;
    // one scenario per seed, shared by that seed's grid cells
    let per_seed: Vec<(Scenario, ObservationSet)> =
        settings.seeds.par_iter().map(|&s| scenario_for(s)).collect::<Result<_>>()?;
    let cells = settings.cells();
    cells
        .par_iter()
        .map(|&(seed, gamma)| {
            let idx = settings.seeds.iter().position(|&s| s == seed).expect("seed in list");
            let (scenario, obs) = &per_seed[idx];
            let penalty = settings.kind.penalty(Some(gamma), None)?;
            let out = fit(&scenario.prior, scenario.truth.as_ref(), obs, &penalty, &settings.solver, settings.t_r, settings.variant)?;
            Ok(SweepRow::from_outcome(seed, gamma, &out))
        })
        .collect()
}

/// Sweeps one scenario; each seed redraws the observations.
pub fn sweep_scenario(scenario: &Scenario, settings: &SweepSettings) -> Result<Vec<SweepRow>> {
    run_cells(settings, |seed| Ok((scenario.clone(), scenario.observations_for_seed(seed)?)))
}

/// Sweeps freshly generated scenarios; seed `s` regenerates the whole
/// scenario from `template` with its seed replaced by `s`.
pub fn sweep_replicates(template: &ScenarioSpec, n_samples: usize, settings: &SweepSettings) -> Result<Vec<SweepRow>> {
    template.validate()?;
    run_cells(settings, |seed| {
        let spec = ScenarioSpec { seed, ..template.clone() };
        let scenario = Scenario::generate(&spec, n_samples)?;
        let obs = scenario.observations.clone();
        Ok((scenario, obs))
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaSummary {
    pub gamma: GammaPoint,
    pub median_relative_error: f64,
    pub recovery_rate: f64,
    pub median_mispredicted: f64,
    pub converged_rate: f64,
    pub median_predicted_edges: f64,
    pub median_objective: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub per_gamma: Vec<GammaSummary>,
    /// Minimizes the median relative error (uses the truth).
    pub best_gamma: Option<GammaPoint>,
    pub best_median_relative_error: Option<f64>,
    /// Maximizes the exact-recovery rate, first in grid order on ties.
    pub best_recovery_gamma: Option<GammaPoint>,
    pub best_recovery_rate: f64,
}

pub fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Summaries per grid point, in order of first appearance in `rows`.
pub fn summarize(rows: &[SweepRow]) -> SweepSummary {
    let mut grid: Vec<GammaPoint> = Vec::new();
    for r in rows {
        if !grid.contains(&r.gamma) {
            grid.push(r.gamma);
        }
    }
    let per_gamma: Vec<GammaSummary> = grid
        .iter()
        .map(|&g| {
            let cell: Vec<&SweepRow> = rows.iter().filter(|r| r.gamma == g).collect();
            let n = cell.len() as f64;
            let mut errs: Vec<f64> = cell.iter().map(|r| r.relative_error).collect();
            let mut mis: Vec<f64> = cell.iter().map(|r| (r.false_positives + r.false_negatives) as f64).collect();
            let mut edges: Vec<f64> = cell.iter().map(|r| r.predicted_edges as f64).collect();
            let mut obj: Vec<f64> = cell.iter().map(|r| r.objective).collect();
            GammaSummary {
                gamma: g,
                median_relative_error: median(&mut errs),
                recovery_rate: cell.iter().filter(|r| r.exact_recovery).count() as f64 / n,
                median_mispredicted: median(&mut mis),
                converged_rate: cell.iter().filter(|r| r.converged).count() as f64 / n,
                median_predicted_edges: median(&mut edges),
                median_objective: median(&mut obj),
            }
        })
        .collect();
    let best = per_gamma
        .iter()
        .filter(|s| s.median_relative_error.is_finite())
        .min_by(|a, b| a.median_relative_error.total_cmp(&b.median_relative_error));
    let mut best_recovery: Option<&GammaSummary> = None;
    for s in &per_gamma {
        if best_recovery.is_none_or(|b| s.recovery_rate > b.recovery_rate) {
            best_recovery = Some(s);
        }
    }
    SweepSummary {
        best_gamma: best.map(|s| s.gamma),
        best_median_relative_error: best.map(|s| s.median_relative_error),
        best_recovery_gamma: best_recovery.map(|s| s.gamma),
        best_recovery_rate: best_recovery.map(|s| s.recovery_rate).unwrap_or(0.0),
        per_gamma,
    }
}

pub fn sweep_csv(kind: PenaltyKind, rows: &[SweepRow]) -> String {
    let mut out = format!("# linkpred sweep v{SWEEP_CSV_VERSION} penalty={}\n", kind.name());
    out.push_str("seed,gamma,gamma2,relative_error,false_positives,false_negatives,exact_recovery,iterations,converged,objective,predicted_edges\n");
    for r in rows {
        let (g1, g2) = r.gamma.csv_cells();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.seed,
            g1,
            g2,
            r.relative_error,
            r.false_positives,
            r.false_negatives,
            r.exact_recovery,
            r.iterations,
            r.converged,
            r.objective,
            r.predicted_edges
        ));
    }
    out
}
