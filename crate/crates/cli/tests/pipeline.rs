use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
seed = 3
[design]
dim = 3
levels = [100.0, 50.0, 25.0]
counts = [30, 10, 4]
[optimizer]
starts = 3
max_evals = 300
refine = 1
polish_evals = 500
[exceedance]
n_sim = 200
n_pts = 500
"#;

fn mfgp(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfgp"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = mfgp(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(out.stdout.is_empty(), "data must not go to stdout");
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), SMALL).unwrap();
    dir
}

fn run_steps(dir: &Path, steps: &[&str]) {
    for step in steps {
        ok(dir, &[step, "--config", "run.toml", "--out", "o"]);
    }
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn full_pipeline_emits_every_artifact() {
    let dir = setup();
    run_steps(
        dir.path(),
        &["design", "simulate", "fit", "validate", "predict", "exceed", "report"],
    );
    let o = dir.path().join("o");
    for f in [
        "design.csv",
        "data.csv",
        "model.json",
        "loo.csv",
        "loo_summary.json",
        "predictions.csv",
        "p_samples.csv",
        "exceedance_density.csv",
        "exceedance_summary.json",
        "report_loo.csv",
        "report_residual_density.csv",
        "report_levels.csv",
        "report_exceedance_density.csv",
        "report.json",
    ] {
        assert!(o.join(f).exists(), "missing {f}");
    }
    let model = json(&o.join("model.json"));
    assert_eq!(model["schema_version"], 1);
    assert_eq!(model["variant"], "two-scale");
    assert_eq!(model["config"]["optimizer"]["starts"], 3);
    assert!(model["noise"]["20.000000"]["log_variance"].is_number());
    assert_eq!(model["data"]["outputs"].as_array().unwrap().len(), 44);

    let loo = json(&o.join("loo_summary.json"));
    assert_eq!(loo["n"], 44);
    assert!(loo["config"].is_object());

    let samples = std::fs::read_to_string(o.join("p_samples.csv")).unwrap();
    assert_eq!(samples.lines().count(), 201);
    let summary = json(&o.join("exceedance_summary.json"));
    let mean = summary["summary"]["mean"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&mean));
}

#[test]
fn fit_and_predict_are_bit_reproducible() {
    let a = setup();
    let b = setup();
    for dir in [a.path(), b.path()] {
        run_steps(dir, &["design", "simulate", "fit", "predict"]);
    }
    for f in ["data.csv", "model.json", "predictions.csv"] {
        let x = std::fs::read(a.path().join("o").join(f)).unwrap();
        let y = std::fs::read(b.path().join("o").join(f)).unwrap();
        assert!(x == y, "{f} differs between runs");
    }
}

#[test]
fn echoed_config_reproduces_the_fit() {
    let dir = setup();
    run_steps(dir.path(), &["design", "simulate", "fit"]);
    let o = dir.path().join("o");
    let first = json(&o.join("model.json"));
    let echoed = serde_json::to_string(&first["config"]).unwrap();
    std::fs::write(dir.path().join("echo.json"), echoed).unwrap();
    ok(dir.path(), &["fit", "--config", "echo.json", "--model", "again.json"]);
    let second = json(&dir.path().join("again.json"));
    assert_eq!(first["theta"], second["theta"]);
    assert_eq!(first["objective"], second["objective"]);
}

#[test]
fn exceed_defaults_are_recorded() {
    let dir = setup();
    run_steps(dir.path(), &["design", "simulate", "fit"]);
    // No config: the full-size defaults apply.
    ok(dir.path(), &["exceed", "--out", "o", "--seed", "3"]);
    let summary = json(&dir.path().join("o").join("exceedance_summary.json"));
    assert_eq!(summary["n_sim"], 1000);
    assert_eq!(summary["n_pts"], 5000);
    assert_eq!(summary["threshold"], 60.0);
    assert_eq!(summary["config"]["exceedance"]["n_sim"], 1000);
}

#[test]
fn exit_codes() {
    let dir = setup();
    assert_eq!(mfgp(dir.path(), &["fit", "--bogus"]).status.code(), Some(2));
    assert_eq!(mfgp(dir.path(), &["launch"]).status.code(), Some(2));
    assert_eq!(mfgp(dir.path(), &["fit", "--config", "missing.toml"]).status.code(), Some(2));
    std::fs::write(dir.path().join("bad.toml"), "[optimizer]\nstart = 3\n").unwrap();
    assert_eq!(mfgp(dir.path(), &["fit", "--config", "bad.toml"]).status.code(), Some(2));
    assert_eq!(mfgp(dir.path(), &["--help"]).status.code(), Some(0));
    // No data file yet.
    assert_eq!(mfgp(dir.path(), &["fit", "--out", "o"]).status.code(), Some(2));

    std::fs::create_dir_all(dir.path().join("o")).unwrap();
    std::fs::write(dir.path().join("o/data.csv"), "x1,t,z\n0.1,1,5\n0.5,1,5\n0.9,1,5\n").unwrap();
    let out = mfgp(dir.path(), &["fit", "--out", "o"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());

    std::fs::write(dir.path().join("o/data.csv"), "x1,t,z\n0.1,1,5\n0.5,1,NaN\n").unwrap();
    let out = mfgp(dir.path(), &["fit", "--out", "o"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}
