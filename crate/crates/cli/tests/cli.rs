use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn linkpred(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_linkpred")).args(args).current_dir(cwd).output().expect("run linkpred")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    fs::write(dir.join(name), body).unwrap();
    name.to_string()
}

const PLP_CONFIG: &str = r#"{
  "scenario": {"dim": 10, "edge_density": 0.7, "n_add": 3, "n_remove": 0, "seed": 3},
  "N": 1000,
  "penalty_kind": "plp",
  "gamma_grid": [0.02, 0.08, 0.5],
  "seeds": [3, 4],
  "output_dir": "scenario"
}"#;

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn generate_is_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "cfg.json", PLP_CONFIG);
    assert_eq!(code(&linkpred(&["generate", "--config", &cfg, "--out", "a"], tmp.path())), 0);
    assert_eq!(code(&linkpred(&["generate", "--config", &cfg, "--out", "b"], tmp.path())), 0);
    let a = dir_bytes(&tmp.path().join("a"));
    assert_eq!(a, dir_bytes(&tmp.path().join("b")));
    assert!(a.iter().any(|(n, _)| n == "omega_t.txt"));

    let meta = read_json(&tmp.path().join("a/metadata.json"));
    assert_eq!(meta["appearing"].as_array().unwrap().len(), 3);
    assert_eq!(meta["rng"], "ChaCha8Rng");

    assert_eq!(code(&linkpred(&["generate", "--config", &cfg, "--out", "c", "--seed", "9"], tmp.path())), 0);
    assert_ne!(a, dir_bytes(&tmp.path().join("c")));
}

#[test]
fn generate_rejects_impossible_removals() {
    let tmp = tempfile::tempdir().unwrap();
    let body = PLP_CONFIG.replace("\"n_remove\": 0", "\"n_remove\": 40").replace("0.7", "0.1");
    let cfg = write_config(tmp.path(), "cfg.json", &body);
    let out = linkpred(&["generate", "--config", &cfg], tmp.path());
    assert_eq!(code(&out), 1, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn config_typos_are_validation_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "cfg.json", &PLP_CONFIG.replace("\"seeds\"", "\"sedes\""));
    assert_eq!(code(&linkpred(&["generate", "--config", &cfg], tmp.path())), 1);
    let empty = write_config(tmp.path(), "empty.json", &PLP_CONFIG.replace("[0.02, 0.08, 0.5]", "[]"));
    assert_eq!(code(&linkpred(&["sweep", "--config", &empty], tmp.path())), 1);
    assert_eq!(code(&linkpred(&["generate", "--config", "missing.json"], tmp.path())), 2);
}

#[test]
fn fit_writes_reports_and_matrices() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "cfg.json", PLP_CONFIG);
    assert_eq!(code(&linkpred(&["generate", "--config", &cfg], tmp.path())), 0);
    let out = linkpred(&["fit", "scenario", "--penalty", "plp", "--gamma", "0.08", "--out", "fit"], tmp.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&tmp.path().join("fit/report.json"));
    assert_eq!(report["converged"], true);
    assert_eq!(report["penalty"]["kind"], "plp");
    assert!(report["relative_error"].as_f64().unwrap() >= 0.0);
    let scores = fs::read_to_string(tmp.path().join("fit/scores.txt")).unwrap();
    assert!(scores.starts_with("# variant: partial_correlation\n"));
    for f in ["lambda.txt", "t_o.txt", "precision.txt", "omega_hat.txt", "trace.csv"] {
        assert!(tmp.path().join("fit").join(f).exists(), "{f}");
    }

    let eval = linkpred(&["eval", "fit/omega_hat.txt", "scenario/omega_t.txt"], tmp.path());
    assert_eq!(code(&eval), 0);
    let report: Value = serde_json::from_slice(&eval.stdout).unwrap();
    assert!(report["false_positives"].is_u64());

    let known = linkpred(&["fit", "scenario", "--penalty", "known", "--support", "scenario/omega_t.txt", "--out", "known"], tmp.path());
    assert_eq!(code(&known), 0, "{}", String::from_utf8_lossy(&known.stderr));
    let report = read_json(&tmp.path().join("known/report.json"));
    assert!(report["duality_gap"].as_f64().unwrap().abs() < 1e-6);
}

#[test]
fn fit_flags_non_convergence_with_exit_code_three() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "cfg.json", PLP_CONFIG);
    assert_eq!(code(&linkpred(&["generate", "--config", &cfg], tmp.path())), 0);
    let short = write_config(tmp.path(), "short.json", &PLP_CONFIG.replace("\"N\": 1000,", "\"N\": 1000, \"solver\": {\"max_iters\": 1},"));
    let out = linkpred(&["fit", "scenario", "--penalty", "plp", "--gamma", "0.01", "--config", &short, "--out", "fit"], tmp.path());
    assert_eq!(code(&out), 3);
    assert_eq!(read_json(&tmp.path().join("fit/report.json"))["converged"], false);
    assert_eq!(code(&linkpred(&["fit", "scenario", "--penalty", "mixed", "--gamma", "0.08"], tmp.path())), 1);
    assert_eq!(code(&linkpred(&["fit", "absent", "--penalty", "plp", "--gamma", "0.08"], tmp.path())), 2);
}

#[test]
fn sweeps_are_deterministic_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "cfg.json", PLP_CONFIG);
    assert_eq!(code(&linkpred(&["generate", "--config", &cfg], tmp.path())), 0);
    assert_eq!(code(&linkpred(&["sweep", "scenario", "--config", &cfg, "--out", "one", "--threads", "1"], tmp.path())), 0);
    assert_eq!(code(&linkpred(&["sweep", "scenario", "--config", &cfg, "--out", "four", "--threads", "4"], tmp.path())), 0);
    let one = fs::read_to_string(tmp.path().join("one/sweep.csv")).unwrap();
    assert_eq!(one, fs::read_to_string(tmp.path().join("four/sweep.csv")).unwrap());
    assert!(one.starts_with("# linkpred sweep v1"));
    assert_eq!(one.lines().count(), 2 + 2 * 3);
    let summary = read_json(&tmp.path().join("one/summary.json"));
    assert_eq!(summary["per_gamma"].as_array().unwrap().len(), 3);
    assert!(summary["best_gamma"].is_number());

    assert_eq!(code(&linkpred(&["sweep", "--config", &cfg, "--out", "rep"], tmp.path())), 0);
    assert_eq!(fs::read_to_string(tmp.path().join("rep/sweep.csv")).unwrap().lines().count(), 8);
}

#[test]
fn baselines_default_k_and_zero_budget() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "cfg.json", PLP_CONFIG);
    assert_eq!(code(&linkpred(&["generate", "--config", &cfg], tmp.path())), 0);
    assert_eq!(code(&linkpred(&["baselines", "scenario", "--out", "auto"], tmp.path())), 0);
    let auto = read_json(&tmp.path().join("auto/baselines.json"));
    assert_eq!(auto["k_appearing"], 3);
    assert_eq!(auto["common_neighbors"]["changed_pairs"].as_array().unwrap().len(), 3);

    assert_eq!(code(&linkpred(&["baselines", "scenario", "--k", "0", "--out", "zero"], tmp.path())), 0);
    let zero = read_json(&tmp.path().join("zero/baselines.json"));
    assert_eq!(zero["common_neighbors"]["false_positives"], 0);
    assert_eq!(zero["common_neighbors"]["false_negatives"], 3);
}

#[test]
fn complete_prior_ties_every_removal() {
    let tmp = tempfile::tempdir().unwrap();
    let body = PLP_CONFIG.replace("0.7", "1.0").replace("\"n_add\": 3", "\"n_add\": 0").replace("\"n_remove\": 0", "\"n_remove\": 2");
    let cfg = write_config(tmp.path(), "cfg.json", &body);
    assert_eq!(code(&linkpred(&["generate", "--config", &cfg], tmp.path())), 0);
    assert_eq!(code(&linkpred(&["baselines", "scenario"], tmp.path())), 0);
    let r = read_json(&tmp.path().join("scenario/baselines.json"));
    assert_eq!(r["reversed_common_neighbors"]["ties_at_cutoff"], true);
    assert_eq!(r["reversed_common_neighbors"]["degenerate"], true);
}
