use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use linkpred::experiment::{self, fit, summarize, sweep_csv, sweep_replicates, sweep_scenario, FitOutcome, SweepSettings};
use linkpred::predict::{evaluate, nlp_reversed_baseline, plp_baseline};
use linkpred::{io, ExperimentConfig, GammaPoint, PenaltyKind, PenaltySpec, PredictionReport, Scenario, SolverConfig, Termination};
use serde::Serialize;

const EXIT_VALIDATION: u8 = 1;
const EXIT_IO: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;

/// Link prediction in Gaussian graphical models with a KL-divergence prior.
#[derive(Parser, Debug)]
#[command(name = "linkpred", version, about)]
struct Cli {
    /// Worker threads for sweeps (defaults to all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a prior/truth scenario with observations
    Generate {
        /// Experiment config (JSON)
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides output_dir in the config)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Scenario seed (overrides scenario.seed in the config)
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fit one penalty to a scenario and score the predicted support
    Fit {
        scenario: PathBuf,
        #[arg(long)]
        penalty: PenaltyKind,
        /// Weight; "eta_p,eta_n" for mixed
        #[arg(long)]
        gamma: Option<String>,
        /// Support file for the known-support fit
        #[arg(long)]
        support: Option<PathBuf>,
        /// Experiment config supplying solver settings, t_r and score variant
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Use a fresh draw of observations for this seed
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Sweep the regularization grid over seeds
    Sweep {
        /// Scenario directory; omitted means one generated scenario per seed
        scenario: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        penalty: Option<PenaltyKind>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Common-neighbour baselines for appearing and disappearing links
    Baselines {
        scenario: PathBuf,
        /// Number of changed links to predict (defaults to the true counts)
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare a predicted support file against a true one
    Eval { predicted: PathBuf, truth: PathBuf },
}

#[derive(Debug)]
enum CliError {
    Validation(String),
    Io(String),
}

impl From<linkpred::Error> for CliError {
    fn from(e: linkpred::Error) -> Self {
        match e {
            linkpred::Error::Io(_) => CliError::Io(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn read_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(ExperimentConfig::from_json(&text)?)
}

fn parse_gamma(kind: PenaltyKind, text: &str) -> Result<GammaPoint, CliError> {
    let values: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| invalid(format!("bad weight {s:?}"))))
        .collect::<Result<_, _>>()?;
    let point = match values.as_slice() {
        [g] => GammaPoint::Single(*g),
        [p, n] => GammaPoint::Pair([*p, *n]),
        _ => return Err(invalid("gamma takes one value, or two for mixed")),
    };
    experiment::validate_grid(kind, &[point])?;
    Ok(point)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| invalid(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn cmd_generate(config: &Path, out: Option<PathBuf>, seed: Option<u64>) -> Result<bool, CliError> {
    let mut cfg = read_config(config)?;
    if let Some(s) = seed {
        cfg.scenario.seed = s;
    }
    let dir = out.unwrap_or_else(|| cfg.output_dir.clone());
    let scenario = Scenario::generate(&cfg.scenario, cfg.n_samples)?;
    scenario.write_dir(&dir)?;
    write_json(&dir.join("config.json"), &cfg)?;
    println!("wrote scenario to {}", dir.display());
    Ok(true)
}

#[derive(Serialize)]
struct FitReport<'a> {
    penalty: &'a PenaltySpec,
    converged: bool,
    termination: Termination,
    iterations: usize,
    final_objective: f64,
    final_residual: f64,
    duality_gap: Option<f64>,
    constraint_residual: Option<f64>,
    relative_error: Option<f64>,
    score_variant: &'static str,
    t_r: f64,
    observation_seed: u64,
    solver: &'a SolverConfig,
    prediction: &'a PredictionReport,
}

fn write_fit(dir: &Path, out: &FitOutcome, cfg: &ExperimentConfig, obs_seed: u64) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    let res = &out.result;
    let report = FitReport {
        penalty: &out.penalty,
        converged: res.converged,
        termination: res.termination,
        iterations: res.iterations,
        final_objective: res.final_objective(),
        final_residual: res.final_residual,
        duality_gap: res.duality_gap,
        constraint_residual: res.constraint_residual,
        relative_error: out.relative_error,
        score_variant: out.scores.variant.name(),
        t_r: cfg.t_r,
        observation_seed: obs_seed,
        solver: &cfg.solver,
        prediction: &out.report,
    };
    write_json(&dir.join("report.json"), &report)?;
    io::write_matrix(&dir.join("lambda.txt"), &res.lambda, None)?;
    io::write_matrix(&dir.join("t_o.txt"), &res.t_o, None)?;
    io::write_matrix(&dir.join("precision.txt"), &res.precision, None)?;
    io::write_matrix(&dir.join("scores.txt"), &out.scores.scores, Some(&format!("variant: {}", out.scores.variant.name())))?;
    io::write_support(&dir.join("omega_hat.txt"), &out.report.predicted_support)?;
    let trace: String = res.objective_trace.iter().enumerate().map(|(k, v)| format!("{k},{v}\n")).collect();
    fs::write(dir.join("trace.csv"), format!("iteration,objective\n{trace}"))?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_fit(
    scenario_dir: &Path,
    kind: PenaltyKind,
    gamma: Option<String>,
    support: Option<PathBuf>,
    config: Option<PathBuf>,
    out: Option<PathBuf>,
    seed: Option<u64>,
) -> Result<bool, CliError> {
    let cfg = match &config {
        Some(p) => read_config(p)?,
        None => ExperimentConfig::plp_reference(),
    };
    let scenario = Scenario::read_dir(scenario_dir)?;
    let gamma = gamma.map(|g| parse_gamma(kind, &g)).transpose()?;
    let known = support.map(|p| io::read_support(&p)).transpose()?;
    let penalty = kind.penalty(gamma, known.as_ref())?;
    let obs_seed = seed.unwrap_or(scenario.seed);
    let observations = scenario.observations_for_seed(obs_seed)?;
    let outcome = fit(&scenario.prior, scenario.truth.as_ref(), &observations, &penalty, &cfg.solver, cfg.t_r, cfg.score_variant)?;
    let dir = out.unwrap_or_else(|| scenario_dir.join(format!("fit_{}", kind.name())));
    write_fit(&dir, &outcome, &cfg, obs_seed)?;
    let r = &outcome.report;
    println!(
        "{}: {:?} after {} iterations, FP={} FN={} exact={}",
        kind.name(),
        outcome.result.termination,
        outcome.result.iterations,
        r.false_positives,
        r.false_negatives,
        r.exact_recovery()
    );
    Ok(outcome.result.converged)
}

fn cmd_sweep(scenario_dir: Option<PathBuf>, config: Option<PathBuf>, penalty: Option<PenaltyKind>, out: Option<PathBuf>) -> Result<bool, CliError> {
    let mut cfg = match &config {
        Some(p) => read_config(p)?,
        None => match penalty {
            Some(PenaltyKind::Nlp) => ExperimentConfig::nlp_reference(),
            Some(_) | None => ExperimentConfig::plp_reference(),
        },
    };
    if let Some(kind) = penalty {
        if kind != cfg.penalty_kind {
            cfg.penalty_kind = kind;
            cfg.gamma_grid = None;
        }
    }
    let settings = SweepSettings::from_config(&cfg);
    let rows = match &scenario_dir {
        Some(dir) => sweep_scenario(&Scenario::read_dir(dir)?, &settings)?,
        None => sweep_replicates(&cfg.scenario, cfg.n_samples, &settings)?,
    };
    let dir = out.or_else(|| scenario_dir.clone()).unwrap_or_else(|| cfg.output_dir.clone());
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("sweep.csv"), sweep_csv(cfg.penalty_kind, &rows))?;
    let summary = summarize(&rows);
    write_json(&dir.join("summary.json"), &summary)?;
    for g in &summary.per_gamma {
        println!(
            "gamma {}: median E_r {:.4}, exact recovery {:.0}%, median edges {}",
            g.gamma,
            g.median_relative_error,
            100.0 * g.recovery_rate,
            g.median_predicted_edges
        );
    }
    if let Some(best) = summary.best_gamma {
        println!("lowest median E_r at gamma {best}");
    }
    Ok(rows.iter().all(|r| r.converged))
}

#[derive(Serialize)]
struct BaselineReports {
    k_appearing: usize,
    k_disappearing: usize,
    common_neighbors: PredictionReport,
    reversed_common_neighbors: PredictionReport,
}

fn cmd_baselines(scenario_dir: &Path, k: Option<usize>, out: Option<PathBuf>) -> Result<bool, CliError> {
    let scenario = Scenario::read_dir(scenario_dir)?;
    let (k_add, k_remove) = match (k, &scenario.truth) {
        (Some(k), _) => (k, k),
        (None, Some(_)) => (scenario.appearing().len(), scenario.disappearing().len()),
        (None, None) => return Err(invalid("no true support available; pass --k")),
    };
    let mut plp = plp_baseline(scenario.prior.support(), k_add)?;
    let mut nlp = nlp_reversed_baseline(scenario.prior.support(), k_remove)?;
    if let Some(t) = &scenario.truth {
        plp.score_against(t.support())?;
        nlp.score_against(t.support())?;
    }
    let dir = out.unwrap_or_else(|| scenario_dir.to_path_buf());
    fs::create_dir_all(&dir)?;
    let reports = BaselineReports { k_appearing: k_add, k_disappearing: k_remove, common_neighbors: plp, reversed_common_neighbors: nlp };
    write_json(&dir.join("baselines.json"), &reports)?;
    for r in [&reports.common_neighbors, &reports.reversed_common_neighbors] {
        let pairs: Vec<String> = r.changed_pairs.iter().map(|p| p.to_string()).collect();
        println!(
            "{}: changed [{}] FP={} FN={}{}",
            r.method_name,
            pairs.join(" "),
            r.false_positives,
            r.false_negatives,
            if r.ties_at_cutoff { " (ties at cutoff)" } else { "" }
        );
    }
    Ok(true)
}

fn cmd_eval(predicted: &Path, truth: &Path) -> Result<bool, CliError> {
    let report = evaluate(&io::read_support(predicted)?, &io::read_support(truth)?)?;
    let text = serde_json::to_string_pretty(&report).map_err(|e| invalid(e.to_string()))?;
    println!("{text}");
    Ok(true)
}

fn run(cli: Cli) -> Result<bool, CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(invalid("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| invalid(e.to_string()))?;
    }
    match cli.command {
        Command::Generate { config, out, seed } => cmd_generate(&config, out, seed),
        Command::Fit { scenario, penalty, gamma, support, config, out, seed } => {
            cmd_fit(&scenario, penalty, gamma, support, config, out, seed)
        }
        Command::Sweep { scenario, config, penalty, out } => cmd_sweep(scenario, config, penalty, out),
        Command::Baselines { scenario, k, out } => cmd_baselines(&scenario, k, out),
        Command::Eval { predicted, truth } => cmd_eval(&predicted, &truth),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("warning: solver did not converge; results were written");
            ExitCode::from(EXIT_NOT_CONVERGED)
        }
        Err(CliError::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_VALIDATION)
        }
        Err(CliError::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_IO)
        }
    }
}
