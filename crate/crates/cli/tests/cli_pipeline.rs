//! End-to-end checks of the command-line surface: the bundled walkthrough
//! config drives simulate -> fit -> summarize -> curves, plus the error
//! contract (exit 2 for config problems, 3 for runtime problems).

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_ilm")
}

fn repo_path(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ilm-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> std::process::Output {
    Command::new(bin()).args(args).output().expect("launch ilm")
}

#[test]
fn full_pipeline_on_bundled_config() {
    let config = repo_path("configs/sir_demo.toml");
    let config = config.to_str().unwrap();
    let base = tmp("pipeline");

    // simulate
    let sim_dir = base.join("sim");
    let out = run(&[
        "simulate",
        "--config",
        config,
        "--output-dir",
        sim_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{out:?}");
    for f in ["events.csv", "network.csv", "states.csv", "observations.csv", "manifest.json"] {
        assert!(sim_dir.join(f).exists(), "missing {f}");
    }
    // every infectee appears at most once in the network file
    let net = std::fs::read_to_string(sim_dir.join("network.csv")).unwrap();
    let mut seen = std::collections::HashSet::new();
    for line in net.lines().skip(1) {
        let infectee = line.split(',').next().unwrap();
        assert!(seen.insert(infectee.to_string()), "duplicate infectee {infectee}");
    }

    // fit (smoke-scale iteration count through the override flag)
    let fit_dir = base.join("fit");
    let out = run(&[
        "fit",
        "--config",
        config,
        "--observations",
        sim_dir.join("observations.csv").to_str().unwrap(),
        "--output-dir",
        fit_dir.to_str().unwrap(),
        "--iterations",
        "300",
    ]);
    assert!(out.status.success(), "{out:?}");
    let params = std::fs::read_to_string(fit_dir.join("chain_0/parameters.csv")).unwrap();
    assert_eq!(params.lines().count(), 302, "header + 301 samples");
    // finite log-posteriors throughout
    for line in params.lines().skip(1) {
        let lp: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!(lp.is_finite());
    }

    // summarize
    let out = run(&[
        "summarize",
        "--config",
        config,
        "--run-dir",
        fit_dir.to_str().unwrap(),
        "--burnin",
        "100",
        "--thin",
        "2",
    ]);
    assert!(out.status.success(), "{out:?}");
    let summary = std::fs::read_to_string(fit_dir.join("summary.csv")).unwrap();
    // one row per parameter
    assert_eq!(summary.lines().count(), 1 + 3);
    assert!(fit_dir.join("summary.json").exists());
    let net_post = std::fs::read_to_string(fit_dir.join("network_posterior.csv")).unwrap();
    assert!(net_post.lines().count() > 1);
    // incoming probability mass per infectee is 1
    let mut mass: std::collections::HashMap<String, f64> = std::collections::HashMap::new();
    for line in net_post.lines().skip(1) {
        let mut parts = line.split(',');
        let _source = parts.next().unwrap();
        let target = parts.next().unwrap().to_string();
        let p: f64 = parts.next().unwrap().parse().unwrap();
        *mass.entry(target).or_insert(0.0) += p;
    }
    for (target, total) in mass {
        assert!(
            (total - 1.0).abs() < 1e-9,
            "individual {target} has incoming mass {total}"
        );
    }

    // curves
    let out = run(&[
        "curves",
        "--config",
        config,
        "--run-dir",
        fit_dir.to_str().unwrap(),
        "--burnin",
        "100",
        "--thin",
        "2",
        "--points",
        "21",
    ]);
    assert!(out.status.success(), "{out:?}");
    let curves = std::fs::read_to_string(fit_dir.join("curves.csv")).unwrap();
    // SIR: 3 states x 21 points + header
    assert_eq!(curves.lines().count(), 1 + 3 * 21);

    std::fs::remove_dir_all(&base).ok();
}

#[test]
fn two_chains_write_two_sample_directories() {
    let config_text = std::fs::read_to_string(repo_path("configs/sir_demo.toml"))
        .unwrap()
        .replace("chains = 1", "chains = 2")
        .replace("init_attempts = 50000", "init_attempts = 300")
        .replace("../data/", repo_path("data/").to_str().unwrap());
    let base = tmp("twochains");
    let config_path = base.join("config.toml");
    std::fs::write(&config_path, config_text).unwrap();

    let sim_dir = base.join("sim");
    let out = run(&[
        "simulate",
        "--config",
        config_path.to_str().unwrap(),
        "--output-dir",
        sim_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{out:?}");
    let fit_dir = base.join("fit");
    let out = run(&[
        "fit",
        "--config",
        config_path.to_str().unwrap(),
        "--observations",
        sim_dir.join("observations.csv").to_str().unwrap(),
        "--output-dir",
        fit_dir.to_str().unwrap(),
        "--iterations",
        "50",
    ]);
    assert!(out.status.success(), "{out:?}");
    assert!(fit_dir.join("chain_0/parameters.csv").exists());
    assert!(fit_dir.join("chain_1/parameters.csv").exists());
    std::fs::remove_dir_all(&base).ok();
}

#[test]
fn missing_risk_csv_exits_2_and_names_path() {
    let base = tmp("missing");
    let config_text = std::fs::read_to_string(repo_path("configs/sir_demo.toml"))
        .unwrap()
        .replace("../data/sir_demo_risks.csv", "/nonexistent/risks.csv");
    let config_path = base.join("config.toml");
    std::fs::write(&config_path, config_text).unwrap();
    let out = run(&[
        "simulate",
        "--config",
        config_path.to_str().unwrap(),
        "--output-dir",
        base.join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("/nonexistent/risks.csv"),
        "error does not name the path: {stderr}"
    );
    std::fs::remove_dir_all(&base).ok();
}

#[test]
fn inert_single_individual_config() {
    let base = tmp("inert");
    let config_path = base.join("config.toml");
    let risks_path = base.join("risks.csv");
    std::fs::write(&risks_path, "riskfactor1\n1.0\n").unwrap();
    let config_text = format!(
        r#"
seed = 1
[population]
risks = "{}"
[model]
class = "SI"
[model.functions]
sparks = "0.0"
susceptibility = "1.0"
infectivity_kernel = "1.0"
transmissibility = "1.0"
[model.parameters]
[simulate]
max_iterations = 100
"#,
        risks_path.display()
    );
    std::fs::write(&config_path, config_text).unwrap();
    let out_dir = base.join("out");
    let out = run(&[
        "simulate",
        "--config",
        config_path.to_str().unwrap(),
        "--output-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{out:?}");
    let events = std::fs::read_to_string(out_dir.join("events.csv")).unwrap();
    assert_eq!(events.lines().count(), 1, "header only: nothing can happen");
    std::fs::remove_dir_all(&base).ok();
}

#[test]
fn burnin_too_large_exits_2_with_iteration_count() {
    let config = repo_path("configs/sir_demo.toml");
    let config = config.to_str().unwrap();
    let base = tmp("burnin");
    let sim_dir = base.join("sim");
    let out = run(&[
        "simulate",
        "--config",
        config,
        "--output-dir",
        sim_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let fit_dir = base.join("fit");
    let out = run(&[
        "fit",
        "--config",
        config,
        "--observations",
        sim_dir.join("observations.csv").to_str().unwrap(),
        "--output-dir",
        fit_dir.to_str().unwrap(),
        "--iterations",
        "60",
    ]);
    assert!(out.status.success(), "{out:?}");
    let out = run(&[
        "summarize",
        "--config",
        config,
        "--run-dir",
        fit_dir.to_str().unwrap(),
        "--burnin",
        "60",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("60"), "message must state the count: {stderr}");
    std::fs::remove_dir_all(&base).ok();
}

#[test]
fn replicates_write_independent_directories() {
    let config = repo_path("configs/sir_demo.toml");
    let base = tmp("reps");
    let out = run(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--output-dir",
        base.to_str().unwrap(),
        "--replicates",
        "3",
        "--seed",
        "28",
    ]);
    assert!(out.status.success(), "{out:?}");
    for r in 0..3 {
        assert!(base.join(format!("replicate_{r}/events.csv")).exists());
    }
    // replicate 0 must match a single-run with the same seed
    let single_dir = tmp("reps-single");
    let out = run(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--output-dir",
        single_dir.to_str().unwrap(),
        "--seed",
        "28",
    ]);
    assert!(out.status.success());
    let a = std::fs::read(base.join("replicate_0/events.csv")).unwrap();
    let b = std::fs::read(single_dir.join("events.csv")).unwrap();
    assert_eq!(a, b);
    std::fs::remove_dir_all(&base).ok();
    std::fs::remove_dir_all(&single_dir).ok();
}
