use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_rswitch");

const MINIMAL: &str = r#"{"dim": 2, "horizon": 100, "lambda": 1.0,
  "rules": [{"kind": "rayleigh", "alpha": 4.0}],
  "noise": {"kind": "gaussian-orthogonal-rescaled", "sigma": 1.0, "eta": 0.5},
  "seed": 1}"#;

fn rswitch(args: &[&str], dir: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(dir)
        .env_remove("RSWITCH_SEED")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn simulate_minimal_config() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.json"), MINIMAL).unwrap();
    let o = rswitch(&["simulate", "--config", "c.json", "--out", "o"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["trace.csv", "regret.csv", "summary.csv", "summary.json", "traces.json"] {
        assert!(dir.path().join("o").join(f).exists(), "{f}");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("o/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["root_seed"], 1);
    assert_eq!(summary["config"]["dim"], 2);
    assert_eq!(summary["runs"][0]["c_rho"], 3.0);
    assert!(summary["runs"][0]["m"].as_u64().unwrap() >= 1);
}

#[test]
fn format_flag_limits_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.json"), MINIMAL).unwrap();
    let o = rswitch(
        &["simulate", "--config", "c.json", "--out", "o", "--format", "csv"],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    assert!(dir.path().join("o/trace.csv").exists());
    assert!(!dir.path().join("o/summary.json").exists());
}

#[test]
fn vacuous_bound_is_an_invalid_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = MINIMAL
        .replace("\"alpha\": 4.0", "\"alpha\": 2.0")
        .replace("\"seed\": 1", "\"seed\": 1, \"assert_bound\": true");
    std::fs::write(dir.path().join("c.json"), cfg).unwrap();
    let o = rswitch(&["simulate", "--config", "c.json", "--out", "o"], dir.path());
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("alpha must exceed c_rho"), "{}", stderr(&o));
}

#[test]
fn malformed_and_unknown_fields_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("a.json"), "{not json").unwrap();
    std::fs::write(dir.path().join("b.json"), MINIMAL.replace("\"seed\"", "\"seeed\"")).unwrap();
    for f in ["a.json", "b.json", "missing.json"] {
        let o = rswitch(&["simulate", "--config", f], dir.path());
        assert_eq!(code(&o), 1, "{f}: {}", stderr(&o));
    }
}

#[test]
fn bad_flags_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["counterexample", "--alpha", "x", "--eta", "0.5", "--lambda", "1"][..],
        &["counterexample", "--alpha", "1.5"][..],
        &["simulate"][..],
        &["frobnicate"][..],
        &["verify", "--threads", "0"][..],
    ] {
        let o = rswitch(args, dir.path());
        assert_eq!(code(&o), 1, "{args:?}");
    }
}

#[test]
fn seed_env_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.json"), MINIMAL).unwrap();
    let o = Command::new(BIN)
        .args(["simulate", "--config", "c.json", "--out", "o", "--format", "json"])
        .current_dir(dir.path())
        .env("RSWITCH_SEED", "99")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    let s = std::fs::read_to_string(dir.path().join("o/summary.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&s).unwrap();
    assert_eq!(v["root_seed"], 99);
    assert_eq!(v["runs"][0]["seed"], 99);
}

#[test]
fn counterexample_found_and_not_found() {
    let dir = tempfile::tempdir().unwrap();
    let o = rswitch(
        &[
            "counterexample",
            "--alpha",
            "1.5",
            "--eta",
            "0.5",
            "--lambda",
            "1",
            "--out",
            "c",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("c/counterexample.json")).unwrap()).unwrap();
    assert_eq!(v["found"], true);
    assert!(v["counterexample"]["det_ratio"].as_f64().unwrap() <= 1.5);
    assert!(std::fs::read_to_string(dir.path().join("c/counterexample.txt"))
        .unwrap()
        .contains("tilde V_t"));

    let o = rswitch(
        &[
            "counterexample",
            "--alpha",
            "1.5",
            "--eta",
            "0",
            "--lambda",
            "1",
            "--out",
            "n",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("not found within budget"));
}

#[test]
fn verify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = rswitch(&["verify", "--out", "d"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    std::fs::write(dir.path().join("e.json"), r#"{"suites": []}"#).unwrap();
    let o = rswitch(&["verify", "--config", "e.json", "--out", "e"], dir.path());
    assert_eq!(code(&o), 0);
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("e/verify.json")).unwrap()).unwrap();
    assert_eq!(v["suites"].as_array().unwrap().len(), 0);

    std::fs::write(
        dir.path().join("adv.json"),
        r#"{"suites": [{"suite": "theorem", "streams": 4, "dims": [2], "horizon": 300, "alpha": 2.0,
            "rule": "determinant", "noise": "adversarial-diagonal"}]}"#,
    )
    .unwrap();
    let o = rswitch(&["verify", "--config", "adv.json", "--out", "a"], dir.path());
    assert_eq!(code(&o), 3);
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a/verify.json")).unwrap()).unwrap();
    let listed = v["suites"][0]["report"]["violations"].as_array().unwrap();
    assert!(!listed.is_empty());
    assert!(listed[0]["t"].as_u64().is_some());
}

#[test]
fn compare_reports_ordering() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("c.json"),
        r#"{"dim": 3, "horizon": 400, "seeds": 2, "seed": 4,
            "rules": [{"kind": "rayleigh", "alpha": 2.0}, {"kind": "determinant", "alpha": 2.0}],
            "env": {"actions": {"mode": "fresh", "count": 5}}}"#,
    )
    .unwrap();
    let o = rswitch(
        &["compare", "--config", "c.json", "--out", "o", "--threads", "2"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("o/comparison.json")).unwrap()).unwrap();
    assert_eq!(v["ordering_holds"], true);
    assert_eq!(v["seeds"].as_array().unwrap().len(), 2);
    assert!(dir.path().join("o/shared_trace.csv").exists());
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = MINIMAL.replace("\"seed\": 1", "\"seed\": 1, \"seeds\": 4");
    std::fs::write(dir.path().join("c.json"), cfg).unwrap();
    assert_eq!(
        code(&rswitch(
            &["simulate", "--config", "c.json", "--out", "a", "--threads", "1"],
            dir.path()
        )),
        0
    );
    assert_eq!(
        code(&rswitch(
            &["simulate", "--config", "c.json", "--out", "b", "--threads", "4"],
            dir.path()
        )),
        0
    );
    for f in ["trace.csv", "regret.csv", "summary.csv", "summary.json", "traces.json"] {
        assert_eq!(
            std::fs::read(dir.path().join("a").join(f)).unwrap(),
            std::fs::read(dir.path().join("b").join(f)).unwrap(),
            "{f}"
        );
    }
}
