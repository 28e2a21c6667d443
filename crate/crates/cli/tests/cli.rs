use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hybrid-bem"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let start = text.find('{').expect("error JSON on stderr");
    serde_json::from_str(&text[start..]).unwrap()
}

#[test]
fn certify_reports_planar_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["certify", "--preset", "example-4.1", "--out-dir", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout: Value = serde_json::from_slice(&out.stdout).unwrap();
    let summary = json(&dir.path().join("summary.json"));
    assert_eq!(stdout, summary);
    assert!((summary["mu_beta"].as_f64().unwrap() + 1.0 / 6.0).abs() < 1e-12);
    assert!((summary["p0"].as_f64().unwrap() - 1.0 / 1344.0).abs() < 1e-12);
    assert_eq!(summary["delta_max"].as_f64().unwrap(), 0.5);
    assert!(summary["eta_at_p0_half"].as_f64().unwrap() > 0.0);
    let csv = std::fs::read_to_string(dir.path().join("stationary.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("regime,mu"));
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn certify_consumes_no_randomness() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (dir, seed) in [(&a, "1"), (&b, "999")] {
        let out = run(&["certify", "--preset", "ginzburg-landau", "--seed", seed, "--out-dir", dir.path().to_str().unwrap()]);
        assert!(out.status.success());
    }
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("summary.json")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn invariant_on_cubic_preset_writes_hundred_samples() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["invariant", "--preset", "example-4.2", "--out-dir", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let samples = std::fs::read_to_string(dir.path().join("samples.csv")).unwrap();
    assert_eq!(samples.lines().next(), Some("sample,regime,X1"));
    assert_eq!(samples.lines().count(), 101);
    let ecdf = std::fs::read_to_string(dir.path().join("ecdf_x1.csv")).unwrap();
    let last = ecdf.lines().last().unwrap();
    assert!(last.ends_with(",1.0000000000000000e0"), "{last}");
    let manifest = json(&dir.path().join("manifest.json"));
    assert_eq!(manifest["replicas"].as_array().unwrap().len(), 100);
    assert!(manifest["replicas"].as_array().unwrap().iter().all(|r| r["status"] == "ok"));
    assert_eq!(manifest["config"]["steps"], 10_000);
}

#[test]
fn manifest_reproduces_artifacts_byte_for_byte() {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    let out = run(&[
        "simulate", "--preset", "planar-switching", "--steps", "300", "--replicas", "8", "--seed", "42",
        "--out-dir", first.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let manifest = first.path().join("manifest.json");
    let out = run(&["simulate", "--config", manifest.to_str().unwrap(), "--out-dir", second.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["path.csv", "terminal.csv", "summary.json"] {
        assert_eq!(
            std::fs::read(first.path().join(name)).unwrap(),
            std::fs::read(second.path().join(name)).unwrap(),
            "{name} differs"
        );
    }
}

#[test]
fn compare_against_identical_step_gives_zero_distance() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "preset = \"planar-switching\"\ndelta = 0.002\nsteps = 200\nreplicas = 30\nladder = [0.002]\nreference_delta = 0.002\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&["compare", "--config", cfg.to_str().unwrap(), "--out-dir", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = json(&out_dir.join("summary.json"));
    assert_eq!(summary["ladder"][0]["wasserstein"].as_f64(), Some(0.0));
}

#[test]
fn invalid_config_lists_every_violation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(
        &cfg,
        r#"
model = "ginzburg-landau"
b = [1.0, 2.0]
a = [-1.0, 0.5]
rho = [2.0, -1.0]
generator = [[-1.5, 1.5], [3.0, -3.0]]
delta = 0.0
steps = 0
replicas = 5
x0 = [0.5]
i0 = 7
"#,
    )
    .unwrap();
    let out = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_json(&out);
    assert_eq!(err["error"]["code"], "cli.validation");
    let fields: Vec<&str> = err["error"]["violations"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v["field"].as_str().unwrap())
        .collect();
    for want in ["a[1]", "delta", "steps", "i0"] {
        assert!(fields.contains(&want), "{want} not in {fields:?}");
    }
}

#[test]
fn oversized_step_fails_the_guard() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["simulate", "--preset", "example-4.1", "--delta", "10", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_json(&out);
    assert_eq!(err["error"]["violations"][0]["field"], "delta");
}

#[test]
fn unparseable_config_reports_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "delta = \"fast\"\n").unwrap();
    let out = run(&["certify", "--config", cfg.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(stderr_json(&out)["error"]["code"], "cli.parse");
    assert!(!out.status.success());
}

#[test]
fn divergence_demo_contrasts_schemes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["divergence-demo", "--replicas", "20", "--out-dir", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = json(&dir.path().join("summary.json"));
    assert_eq!(summary["em_overflowed"], 20);
    assert!(summary["bem_max_norm"].as_f64().unwrap() <= 10.0);
    let path = std::fs::read_to_string(dir.path().join("em_path.csv")).unwrap();
    assert!(path.lines().count() < 20, "explicit path should be truncated at overflow");
}

#[test]
fn strong_error_emits_rates() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["strong-error", "--replicas", "20", "--out-dir", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("strong_error.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6);
    assert!(json(&dir.path().join("summary.json"))["order"].as_f64().unwrap() > 0.0);
}

#[test]
fn contraction_on_planar_preset_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "contraction", "--preset", "planar-switching", "--steps", "500", "--replicas", "10",
        "--y0", "-1,2", "--out-dir", dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let gap = std::fs::read_to_string(dir.path().join("gap.csv")).unwrap();
    assert_eq!(gap.lines().next(), Some("k,t,mean_gap_p"));
    assert_eq!(gap.lines().count(), 52);
}
