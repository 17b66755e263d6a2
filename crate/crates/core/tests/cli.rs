use std::path::Path;
use std::process::{Command, Output};

use tts_ac::fixtures;

fn tts(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tts-ac"))
        .args(args)
        .current_dir(dir)
        .env_remove("TTS_AC_SEED")
        .output()
        .unwrap()
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("chain2.json"), fixtures::CHAIN2_JSON).unwrap();
    dir
}

#[test]
fn oracle_prints_bundle_json() {
    let dir = setup();
    let out = tts(&["oracle", "--mdp", "chain2.json", "--w=0.5,-0.5,0,1"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let bundle: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(bundle["grad_j"].as_array().unwrap().len(), 4);
    assert!((bundle["j_opt"].as_f64().unwrap() - 0.9).abs() < 1e-10);
}

#[test]
fn run_writes_csv_and_json() {
    let dir = setup();
    let args = ["run", "--mdp", "chain2.json", "--horizon", "500", "--seed", "3"];
    let out = tts(&[&args[..], &["--out", "log.csv"]].concat(), dir.path());
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("log.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "t,alpha,beta,tracking_err,grad_norm_sq,opt_gap");
    assert_eq!(csv.lines().count(), 1 + 6);

    let out = tts(&[&args[..], &["--algo", "nac", "--out", "log.json"]].concat(), dir.path());
    assert!(out.status.success());
    let log: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("log.json")).unwrap()).unwrap();
    assert_eq!(log["algorithm"], "nac");
    assert_eq!(log["seed"], 3);
}

#[test]
fn seed_env_var_overrides_default() {
    let dir = setup();
    let run = |env: Option<&str>, seed: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_tts-ac"));
        cmd.args(["run", "--mdp", "chain2.json", "--horizon", "300"])
            .current_dir(dir.path())
            .env_remove("TTS_AC_SEED");
        if let Some(s) = seed {
            cmd.args(["--seed", s]);
        }
        if let Some(e) = env {
            cmd.env("TTS_AC_SEED", e);
        }
        cmd.output().unwrap().stdout
    };
    assert_eq!(run(Some("9"), None), run(None, Some("9")));
    assert_ne!(run(Some("9"), None), run(None, None));
}

#[test]
fn invalid_mdp_exits_with_two() {
    let dir = setup();
    let bad = fixtures::CHAIN2_JSON.replacen("0.9, 0.1", "0.9, 0.2", 1);
    std::fs::write(dir.path().join("bad.json"), bad).unwrap();
    let out = tts(&["check", "--mdp", "bad.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("probability vector"));

    let out = tts(&["run", "--mdp", "chain2.json", "--sigma", "0.3", "--nu", "0.5"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn divergence_exits_with_three() {
    let dir = setup();
    let spec = r#"{"mdp": "chain2.json", "algorithm": "ac", "grid": [{"sigma": 0.6, "nu": 0.4}],
        "lambdas": [0.01], "horizon": 1000, "n_seeds": 1, "base_seed": 0,
        "actor_coeff": 1e308, "critic_coeff": 1e308, "r_theta": 1e308}"#;
    std::fs::write(dir.path().join("spec.json"), spec).unwrap();
    let out = tts(&["sweep", "--spec", "spec.json", "--out", "out"], dir.path());
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn check_reports_constants() {
    let dir = setup();
    let out = tts(&["check", "--mdp", "chain2.json", "--pairs", "50"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("kappa") && text.contains("L_J"));
}

#[test]
fn sweep_overrides_and_outputs() {
    let dir = setup();
    let spec = r#"{"mdp": "chain2.json", "algorithm": "ac",
        "grid": [{"sigma": 0.6, "nu": 0.4}, {"sigma": 0.75, "nu": 0.5}],
        "lambdas": [0.001], "horizon": 100000, "n_seeds": 20, "base_seed": 0}"#;
    std::fs::write(dir.path().join("spec.json"), spec).unwrap();
    let out = tts(
        &["sweep", "--spec", "spec.json", "--out", "o", "--seeds", "2", "--horizon", "2000", "--algo", "nac"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("o/report.json")).unwrap()).unwrap();
    assert_eq!(report.as_array().unwrap().len(), 2);
    assert_eq!(report[0]["n_seeds"], 2);
    assert_eq!(report[1]["opt_gap"]["predicted"]["label"], "σ=3/4");
    for tag in ["sigma0.6_nu0.4_lambda0.001", "sigma0.75_nu0.5_lambda0.001"] {
        assert!(dir.path().join(format!("o/curves/{tag}.csv")).exists());
        assert!(dir.path().join(format!("o/curves/{tag}_stderr.csv")).exists());
    }
    assert!(dir.path().join("o/summary.csv").exists());
}
