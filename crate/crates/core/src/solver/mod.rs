//! Dual solvers for KL-prior covariance estimation.
//!
//! All problems share the smooth dual objective
//! `J_S(Λ) = −log det(S⁻¹ + Λ) + tr(T̂ Λ)` over the open cone
//! `{Λ : S⁻¹ + Λ ≻ 0}` and differ only in a separable penalty or support
//! constraint on `Λ`. The solver runs proximal gradient descent in the
//! coordinates of the stored lower triangle: an off-diagonal variable has
//! partial derivative `2 (T̂ − T_o)_ij` and penalty weight `γ` (counted once).
//! Backtracking rejects every candidate whose Cholesky factorization fails,
//! which keeps all iterates strictly feasible.

mod dual;
mod prox;

pub use dual::{dual_smooth_gradient, dual_smooth_value, primal_from_dual};
pub use prox::{prox_mixed, prox_nlp, prox_plp, shifted_soft_threshold, soft_threshold};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ggm::{kl_divergence, seeded_rng, GaussianModel};
use crate::symmat::{lower_indices, SupportPattern, SymmetricMatrix};
use prox::{apply_rules, known_support_rules, mixed_rules, nlp_rules, plp_rules, EntryRule};

/// Known-support problems stop on a residual this many times smaller than
/// `grad_tol`, relative to `‖T̂‖_F`, so that the moment constraint holds to
/// near machine precision.
const KNOWN_SUPPORT_TOL_FACTOR: f64 = 1e-3;
const MAX_BACKTRACKS: usize = 200;
const MIN_STEP: f64 = 1e-12;
const MAX_STEP: f64 = 1e12;

/// Which problem to solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PenaltySpec {
    /// `Λ` supported on `support`; reproduces `T̂` there.
    KnownSupport { support: SupportPattern },
    /// `γ_P Σ |Λ_ij|` over off-diagonal pairs outside the prior support.
    Plp { gamma_p: f64 },
    /// `γ_N Σ |Λ_ij + (S⁻¹)_ij|` over prior edges, `Λ = 0` elsewhere.
    Nlp { gamma_n: f64 },
    Mixed { eta_p: f64, eta_n: f64 },
}

impl PenaltySpec {
    pub fn plp(gamma_p: f64) -> Self {
        PenaltySpec::Plp { gamma_p }
    }

    pub fn nlp(gamma_n: f64) -> Self {
        PenaltySpec::Nlp { gamma_n }
    }

    pub fn mixed(eta_p: f64, eta_n: f64) -> Self {
        PenaltySpec::Mixed { eta_p, eta_n }
    }

    pub fn known_support(support: SupportPattern) -> Self {
        PenaltySpec::KnownSupport { support }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            PenaltySpec::KnownSupport { .. } => "known",
            PenaltySpec::Plp { .. } => "plp",
            PenaltySpec::Nlp { .. } => "nlp",
            PenaltySpec::Mixed { .. } => "mixed",
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be positive and finite, got {v}")))
            }
        };
        match self {
            PenaltySpec::KnownSupport { support } => Error::check_dim(dim, support.dim()),
            PenaltySpec::Plp { gamma_p } => positive("gamma_p", *gamma_p),
            PenaltySpec::Nlp { gamma_n } => positive("gamma_n", *gamma_n),
            PenaltySpec::Mixed { eta_p, eta_n } => {
                positive("eta_p", *eta_p)?;
                positive("eta_n", *eta_n)
            }
        }
    }

    pub(crate) fn rules(&self, prior: &GaussianModel) -> Vec<EntryRule> {
        match self {
            PenaltySpec::KnownSupport { support } => known_support_rules(support),
            PenaltySpec::Plp { gamma_p } => plp_rules(prior.support(), *gamma_p),
            PenaltySpec::Nlp { gamma_n } => nlp_rules(prior.precision(), prior.support(), *gamma_n),
            PenaltySpec::Mixed { eta_p, eta_n } => mixed_rules(prior.precision(), prior.support(), *eta_p, *eta_n),
        }
    }
}

fn default_max_iters() -> usize {
    50_000
}
fn default_grad_tol() -> f64 {
    1e-7
}
fn default_step_init() -> f64 {
    1.0
}
fn default_backtrack_factor() -> f64 {
    0.5
}
fn default_armijo_const() -> f64 {
    1e-4
}
fn default_zero_tol() -> f64 {
    1e-8
}
fn default_divergence_bound() -> f64 {
    1e8
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    /// Stop when the unit-step proximal-gradient residual (max norm) falls
    /// below this.
    #[serde(default = "default_grad_tol")]
    pub grad_tol: f64,
    #[serde(default = "default_step_init")]
    pub step_init: f64,
    #[serde(default = "default_backtrack_factor")]
    pub backtrack_factor: f64,
    /// Sufficient decrease: accept a step `t` with displacement `d` when the
    /// objective drops by at least `armijo_const · ‖d‖² / (2t)`.
    #[serde(default = "default_armijo_const")]
    pub armijo_const: f64,
    /// Relative to the largest entry of `T_o⁻¹`.
    #[serde(default = "default_zero_tol")]
    pub zero_tol: f64,
    /// Iterates must keep `λ_min(S⁻¹ + Λ) > feasibility_margin`.
    #[serde(default)]
    pub feasibility_margin: f64,
    /// Objective values below `−divergence_bound` stop the run as diverged.
    #[serde(default = "default_divergence_bound")]
    pub divergence_bound: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iters: default_max_iters(),
            grad_tol: default_grad_tol(),
            step_init: default_step_init(),
            backtrack_factor: default_backtrack_factor(),
            armijo_const: default_armijo_const(),
            zero_tol: default_zero_tol(),
            feasibility_margin: 0.0,
            divergence_bound: default_divergence_bound(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_iters >= 1
            && self.grad_tol > 0.0
            && self.step_init > 0.0
            && self.step_init.is_finite()
            && self.backtrack_factor > 0.0
            && self.backtrack_factor < 1.0
            && self.armijo_const > 0.0
            && self.armijo_const < 1.0
            && self.zero_tol >= 0.0
            && self.feasibility_margin >= 0.0
            && self.divergence_bound > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("solver configuration out of range"))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIterations,
    /// No step satisfied sufficient decrease although candidates were feasible.
    Stalled,
    Diverged,
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub lambda: SymmetricMatrix,
    pub t_o: SymmetricMatrix,
    /// `S⁻¹ + Λ`, assembled directly so that exact zeros survive.
    pub precision: SymmetricMatrix,
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    pub final_residual: f64,
    pub duality_gap: Option<f64>,
    pub constraint_residual: Option<f64>,
    pub support_estimate_raw: SupportPattern,
}

impl SolveResult {
    pub fn final_objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace holds the initial value")
    }
}

struct Point {
    lambda: SymmetricMatrix,
    t_o: SymmetricMatrix,
    log_det: f64,
    grad: Vec<f64>,
}

struct Engine<'a> {
    prior_precision: &'a SymmetricMatrix,
    t_hat: &'a SymmetricMatrix,
    rules: Vec<EntryRule>,
    weights: Vec<f64>,
    cfg: &'a SolverConfig,
}

impl<'a> Engine<'a> {
    fn new(prior: &'a GaussianModel, t_hat: &'a SymmetricMatrix, rules: Vec<EntryRule>, cfg: &'a SolverConfig) -> Self {
        let weights = lower_indices(t_hat.dim()).map(|(r, c)| if r == c { 1.0 } else { 2.0 }).collect();
        Engine { prior_precision: prior.precision(), t_hat, rules, weights, cfg }
    }

    fn evaluate(&self, lambda: SymmetricMatrix) -> Option<Point> {
        let k = self.prior_precision + &lambda;
        if self.cfg.feasibility_margin > 0.0 {
            let shifted = &k - &SymmetricMatrix::identity(k.dim()).scaled(self.cfg.feasibility_margin);
            shifted.cholesky().ok()?;
        }
        let chol = k.cholesky().ok()?;
        let t_o = chol.inverse();
        let grad = self
            .t_hat
            .packed()
            .iter()
            .zip(t_o.packed())
            .zip(&self.weights)
            .map(|((a, b), w)| w * (a - b))
            .collect();
        Some(Point { lambda, t_o, log_det: chol.log_det(), grad })
    }

    fn smooth_value(&self, p: &Point) -> f64 {
        -p.log_det + self.t_hat.trace_product(&p.lambda)
    }

    fn penalty(&self, lambda: &SymmetricMatrix) -> f64 {
        lambda.packed().iter().zip(&self.rules).map(|(&x, r)| r.penalty(x)).sum()
    }

    fn penalty_delta(&self, from: &SymmetricMatrix, to: &SymmetricMatrix) -> f64 {
        from.packed()
            .iter()
            .zip(to.packed())
            .zip(&self.rules)
            .map(|((&x, &y), r)| r.penalty(y) - r.penalty(x))
            .sum()
    }

    /// `J(λ_to) − J(λ_from)`, using the series for `log det(I + T D)` when
    /// the step is small so the difference keeps full relative accuracy.
    fn smooth_delta(&self, from: &Point, to: &Point) -> f64 {
        let d = &to.lambda - &from.lambda;
        let linear = self.t_hat.trace_product(&d);
        let n = d.dim();
        let a = from.t_o.matmul_dense(&d);
        let rho = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rho > 0.05 {
            return -(to.log_det - from.log_det) + linear;
        }
        let mut power = a.clone();
        let mut log_det = 0.0;
        for k in 1..=40 {
            let tr: f64 = (0..n).map(|i| power[i * n + i]).sum();
            let term = if k % 2 == 1 { tr / k as f64 } else { -tr / k as f64 };
            log_det += term;
            if term.abs() <= 1e-18 * log_det.abs() || term == 0.0 {
                break;
            }
            let mut next = vec![0.0; n * n];
            for r in 0..n {
                for j in 0..n {
                    let p = power[r * n + j];
                    if p != 0.0 {
                        for c in 0..n {
                            next[r * n + c] += p * a[j * n + c];
                        }
                    }
                }
            }
            power = next;
        }
        -log_det + linear
    }

    fn prox_step(&self, p: &Point, step: f64) -> SymmetricMatrix {
        let data: Vec<f64> = p
            .lambda
            .packed()
            .iter()
            .zip(&p.grad)
            .zip(&self.rules)
            .map(|((&x, &g), rule)| rule.prox(x - step * g, step))
            .collect();
        SymmetricMatrix::from_packed(p.lambda.dim(), data).expect("packed length")
    }

    fn residual(&self, p: &Point) -> f64 {
        let y = self.prox_step(p, 1.0);
        p.lambda.packed().iter().zip(y.packed()).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    fn run(&self, init: SymmetricMatrix, tol: f64) -> Result<(Point, Vec<f64>, usize, Termination, f64)> {
        let cfg = self.cfg;
        let mut cur = self
            .evaluate(init)
            .ok_or_else(|| Error::invalid("initial multiplier is outside the feasible cone"))?;
        let mut objective = self.smooth_value(&cur) + self.penalty(&cur.lambda);
        let mut trace = vec![objective];
        let mut step = cfg.step_init;
        let mut iterations = 0;
        let mut residual = self.residual(&cur);
        let mut termination = Termination::MaxIterations;

        while iterations < cfg.max_iters {
            if residual <= tol {
                termination = Termination::Converged;
                break;
            }
            if objective < -cfg.divergence_bound || !objective.is_finite() {
                termination = Termination::Diverged;
                break;
            }
            let mut t = step;
            let mut any_feasible = false;
            let mut accepted = None;
            for _ in 0..MAX_BACKTRACKS {
                let candidate = self.prox_step(&cur, t);
                let d2: f64 = candidate.packed().iter().zip(cur.lambda.packed()).map(|(a, b)| (a - b).powi(2)).sum();
                if d2 == 0.0 {
                    break;
                }
                let penalty_delta = self.penalty_delta(&cur.lambda, &candidate);
                if let Some(next) = self.evaluate(candidate) {
                    any_feasible = true;
                    let delta = self.smooth_delta(&cur, &next) + penalty_delta;
                    if delta <= -cfg.armijo_const * d2 / (2.0 * t) {
                        accepted = Some((next, delta, t));
                        break;
                    }
                }
                t *= cfg.backtrack_factor;
            }
            let Some((next, delta, t_used)) = accepted else {
                if !any_feasible {
                    return Err(Error::NoFeasibleStep { iteration: iterations, backtracks: MAX_BACKTRACKS });
                }
                termination = Termination::Stalled;
                break;
            };

            // Barzilai-Borwein trial step for the next iteration
            let (mut ss, mut sy) = (0.0, 0.0);
            for k in 0..next.grad.len() {
                let s = next.lambda.packed()[k] - cur.lambda.packed()[k];
                ss += s * s;
                sy += s * (next.grad[k] - cur.grad[k]);
            }
            step = if sy > 0.0 { (ss / sy).clamp(MIN_STEP, MAX_STEP) } else { (t_used / cfg.backtrack_factor).min(MAX_STEP) };

            objective += delta;
            trace.push(objective);
            cur = next;
            iterations += 1;
            residual = self.residual(&cur);
        }
        if termination == Termination::MaxIterations && residual <= tol {
            termination = Termination::Converged;
        }
        Ok((cur, trace, iterations, termination, residual))
    }
}

fn check_inputs(prior: &GaussianModel, t_hat: &SymmetricMatrix, penalty: &PenaltySpec, cfg: &SolverConfig) -> Result<()> {
    Error::check_dim(prior.dim(), t_hat.dim())?;
    if !t_hat.is_finite() {
        return Err(Error::invalid("sample covariance has non-finite entries"));
    }
    penalty.validate(prior.dim())?;
    cfg.validate()
}

/// Solves the penalized or support-constrained dual problem from `Λ = 0`.
pub fn solve(prior: &GaussianModel, t_hat: &SymmetricMatrix, penalty: &PenaltySpec, cfg: &SolverConfig) -> Result<SolveResult> {
    solve_from(prior, t_hat, penalty, cfg, SymmetricMatrix::zeros(prior.dim()))
}

/// Like [`solve`], from a caller-chosen feasible starting multiplier.
pub fn solve_from(
    prior: &GaussianModel,
    t_hat: &SymmetricMatrix,
    penalty: &PenaltySpec,
    cfg: &SolverConfig,
    init: SymmetricMatrix,
) -> Result<SolveResult> {
    check_inputs(prior, t_hat, penalty, cfg)?;
    Error::check_dim(prior.dim(), init.dim())?;
    let rules = penalty.rules(prior);
    if init.packed().iter().zip(&rules).any(|(&v, r)| *r == EntryRule::Fixed && v != 0.0) {
        return Err(Error::invalid("initial multiplier violates the support constraint"));
    }
    let engine = Engine::new(prior, t_hat, rules, cfg);
    let tol = match penalty {
        PenaltySpec::KnownSupport { .. } => cfg.grad_tol * KNOWN_SUPPORT_TOL_FACTOR * t_hat.frobenius_norm().max(f64::MIN_POSITIVE),
        _ => cfg.grad_tol,
    };
    let (point, trace, iterations, termination, residual) = engine.run(init, tol)?;

    let precision = prior.precision() + &point.lambda;
    let support_estimate_raw = precision.support(cfg.zero_tol * precision.max_abs());
    let (duality_gap, constraint_residual) = match penalty {
        PenaltySpec::KnownSupport { support } => {
            let resid = (&point.t_o - t_hat).project(support)?.frobenius_norm();
            let primal = 2.0 * kl_divergence(&point.t_o, prior.covariance())?;
            let dual = -dual_smooth_value(&point.lambda, prior.precision(), t_hat)? + prior.covariance().log_det()?;
            (Some(primal - dual), Some(resid))
        }
        PenaltySpec::Nlp { .. } => {
            let outside = SupportPattern::full(prior.dim()).difference(prior.support());
            (None, Some(point.lambda.project(&outside)?.frobenius_norm()))
        }
        _ => (None, None),
    };

    Ok(SolveResult {
        lambda: point.lambda,
        t_o: point.t_o,
        precision,
        objective_trace: trace,
        iterations,
        converged: termination == Termination::Converged,
        termination,
        final_residual: residual,
        duality_gap,
        constraint_residual,
        support_estimate_raw,
    })
}

/// Minimizes `J_S` over multipliers supported on `omega`, which makes
/// `T_o` agree with `T̂` on `omega`.
pub fn solve_known_support(
    prior: &GaussianModel,
    t_hat: &SymmetricMatrix,
    omega: &SupportPattern,
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    solve(prior, t_hat, &PenaltySpec::known_support(omega.clone()), cfg)
}

/// A random starting point that respects the hard constraints of `penalty`:
/// half of a random symmetric matrix, halved again until feasible.
pub fn random_feasible_start(prior: &GaussianModel, penalty: &PenaltySpec, seed: u64) -> Result<SymmetricMatrix> {
    penalty.validate(prior.dim())?;
    let rules = penalty.rules(prior);
    let mut rng = seeded_rng(seed, 7);
    let scale = prior.precision().max_abs();
    let raw = SymmetricMatrix::from_fn(prior.dim(), |_, _| rng.random_range(-scale..=scale));
    let hard: Vec<EntryRule> = rules.iter().map(|r| if *r == EntryRule::Fixed { *r } else { EntryRule::Free }).collect();
    let mut start = apply_rules(&raw, &hard, 1.0).scaled(0.5);
    for _ in 0..60 {
        if (prior.precision() + &start).cholesky().is_ok() {
            return Ok(start);
        }
        start = start.scaled(0.5);
    }
    Ok(SymmetricMatrix::zeros(prior.dim()))
}
