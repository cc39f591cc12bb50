use std::fs;
use std::path::Path;
use std::process::Command;

use oldroyd2d_cli::cli_main;

fn cli(args: &[&str]) -> i32 {
    cli_main(std::iter::once("oldroyd2d").chain(args.iter().copied()))
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn list_scenarios_exits_zero() {
    assert_eq!(cli(&["list-scenarios"]), 0);
}

#[test]
fn list_scenarios_prints_six_names() {
    let out = Command::new(env!("CARGO_BIN_EXE_oldroyd2d"))
        .arg("list-scenarios")
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let names: Vec<&str> = text.lines().collect();
    assert_eq!(
        names,
        [
            "euler_regression",
            "lp_selftest",
            "decay_a0",
            "decay_positive_a",
            "instability_gap",
            "local_convergence"
        ]
    );
}

#[test]
fn validate_names_the_violated_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", r#"{"scenario": "decay_a0", "params": {"b": 1.5}}"#);
    let out = Command::new(env!("CARGO_BIN_EXE_oldroyd2d"))
        .args(["validate", "--config", &bad])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("b ∈ [−1,1]"));

    let good = write(dir.path(), "good.json", r#"{"scenario": "instability_gap"}"#);
    assert_eq!(cli(&["validate", "--config", &good]), 0);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(cli(&["run", "--scenario", "decay_a0", "--bogus"]), 1);
    assert_eq!(cli(&["frobnicate"]), 1);
    assert_eq!(cli(&["run", "--scenario", "no_such_scenario"]), 1);
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.json");
    assert_eq!(cli(&["validate", "--config", missing.to_str().unwrap()]), 1);
}

#[test]
fn conflicting_scenario_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"scenario": "decay_a0"}"#);
    assert_eq!(cli(&["run", "--scenario", "lp_selftest", "--config", &cfg]), 1);
}

#[test]
fn lp_selftest_writes_a_passing_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("lp");
    let code = cli(&[
        "run",
        "--scenario",
        "lp_selftest",
        "--out",
        out.to_str().unwrap(),
        "--override",
        "grid.n=64",
    ]);
    assert_eq!(code, 0);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["scenario"], "lp_selftest");
    assert_eq!(report["config"]["grid"]["n"], 64);
    for v in report["verdicts"].as_array().unwrap() {
        assert_eq!(v["outcome"], "pass", "{v}");
        assert!(out.join(v["series"].as_str().unwrap()).exists());
    }
}

fn short_convergence(out: &Path) -> i32 {
    cli(&[
        "run",
        "--scenario",
        "local_convergence",
        "--out",
        out.to_str().unwrap(),
        "--override",
        "grid.n=32",
        "--override",
        "stepper.t_end=0.2",
    ])
}

#[test]
fn identical_configs_give_identical_series() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let ca = short_convergence(&a);
    let cb = short_convergence(&b);
    assert_eq!(ca, cb);
    let sa = fs::read(a.join("series.csv")).unwrap();
    assert!(!sa.is_empty());
    assert_eq!(sa, fs::read(b.join("series.csv")).unwrap());
    assert_eq!(
        fs::read(a.join("convergence.csv")).unwrap(),
        fs::read(b.join("convergence.csv")).unwrap()
    );
    let header = String::from_utf8(sa).unwrap();
    assert!(header.starts_with(
        "t,l2_u,l2_tau,linf_tau,h1_utau,b0inf1_tau,b0inf1_w,linf_w,int_b2inf1_tau,energy_residual\n"
    ));
}

#[test]
fn blow_up_exits_two_and_marks_the_series() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("boom");
    let code = cli(&[
        "run",
        "--scenario",
        "local_convergence",
        "--out",
        out.to_str().unwrap(),
        "--override",
        "grid.n=32",
        "--override",
        "data.amplitude=1e200",
    ]);
    assert_eq!(code, 2);
    let series = fs::read_to_string(out.join("series.csv")).unwrap();
    assert!(series.lines().last().unwrap().contains("blowup"));
    let report = fs::read_to_string(out.join("report.json")).unwrap();
    assert!(report.contains("\"blow_up\""));
}

#[test]
fn thread_cap_is_honoured_and_checked() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t");
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_oldroyd2d"))
            .env("OLDROYD2D_THREADS", threads)
            .args(["run", "--scenario", "lp_selftest", "--override", "grid.n=32", "--out"])
            .arg(&out)
            .status()
            .unwrap()
            .code()
    };
    assert_eq!(run("1"), Some(0));
    assert_eq!(run("zero"), Some(1));
}
