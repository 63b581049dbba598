use std::path::Path;
use std::process::{Command, Output};

fn supportlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_supportlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_identity(path: &Path, p: usize) {
    let rows: Vec<String> = (0..p)
        .map(|i| (0..p).map(|j| if i == j { "1" } else { "0" }).collect::<Vec<_>>().join(","))
        .collect();
    std::fs::write(path, rows.join("\n") + "\n").unwrap();
}

#[test]
fn difficulty_on_identity_prints_unit_alpha() {
    let dir = tempfile::tempdir().unwrap();
    let cov = dir.path().join("sigma.csv");
    write_identity(&cov, 10);
    let out = supportlab(&[
        "difficulty",
        "--cov",
        cov.to_str().unwrap(),
        "--k",
        "2",
        "--beta-min",
        "1",
        "--sigma2",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["alpha"], 1.0);
    assert_eq!(json["rho_exact"], 1.0);
    assert_eq!(json["eta"], 1.0);
}

#[test]
fn malformed_csv_is_a_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let x = dir.path().join("x.csv");
    let y = dir.path().join("y.csv");
    std::fs::write(&x, "1,2,3\n4,5\n").unwrap();
    std::fs::write(&y, "1\n2\n").unwrap();
    let out = supportlab(&["fit", "--x", x.to_str().unwrap(), "--y", y.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("x.csv"), "{err}");
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = supportlab(&["sweep", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(supportlab(&["--help"]).status.code(), Some(0));
}

#[test]
fn generate_then_fit_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst");
    let out = supportlab(&[
        "generate", "--out", inst.to_str().unwrap(), "--p", "12", "--density", "0.25", "--snr", "10", "--seed", "3",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["x.csv", "y.csv", "beta.csv", "sigma.csv", "meta.json"] {
        assert!(inst.join(f).exists(), "{f}");
    }
    let x = inst.join("x.csv");
    let y = inst.join("y.csv");
    let beta = inst.join("beta.csv");
    let out = supportlab(&[
        "fit",
        "--x",
        x.to_str().unwrap(),
        "--y",
        y.to_str().unwrap(),
        "--estimator",
        "scad",
        "--criterion",
        "oracle",
        "--truth",
        beta.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let fit: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(fit["criterion"], "oracle");
    assert_eq!(fit["coefs"].as_array().unwrap().len(), 12);

    // the oracle needs the truth
    let out = supportlab(&["fit", "--x", x.to_str().unwrap(), "--y", y.to_str().unwrap(), "--criterion", "oracle"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_analyze_report_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.toml");
    std::fs::write(
        &cfg,
        r#"
seed = 5
p = 8
repetitions = 2
densities = [0.25, 0.5]
beta_distributions = ["uniform"]
snrs = [5.0]
n_over_p = [4.0]
estimators = ["lasso", "scad", "uoi"]
criteria = ["bic", "cv"]

[estimator_settings.path]
n_lambdas = 20

[estimator_settings.uoi]
selection_bootstraps = 3
estimation_bootstraps = 3

[[covariances]]
banding_scale = 1.0
"#,
    )
    .unwrap();
    let store = dir.path().join("store");
    let s = store.to_str().unwrap();
    let out = supportlab(&["sweep", "--config", cfg.to_str().unwrap(), "--out", s, "--max-tasks", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("3 remaining"));

    // a populated store needs --resume
    let out = supportlab(&["sweep", "--config", cfg.to_str().unwrap(), "--out", s]);
    assert_eq!(out.status.code(), Some(2));

    let out = supportlab(&["sweep", "--config", cfg.to_str().unwrap(), "--out", s, "--resume", "--workers", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let merged = std::fs::read_to_string(store.join("records.csv")).unwrap();
    // 4 tasks x 3 estimators x (2 criteria + oracle)
    assert_eq!(merged.lines().count(), 1 + 4 * 3 * 3);

    let out = supportlab(&["analyze", "--out", s]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(store.join("analysis/manifest.json")).unwrap()).unwrap();
    assert!(manifest["files"].as_array().unwrap().len() >= 7);

    let out = supportlab(&["report", "--out", s]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("pooled/all") && text.contains("scad"), "{text}");
}
