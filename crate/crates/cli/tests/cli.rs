//! Black-box tests of the `flipdml` binary: exit codes, report shapes,
//! config-file precedence, and output determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_flipdml"))
}

fn tmp(name: &str) -> PathBuf {
    std::env::temp_dir().join(format!("flipdml-cli-{}-{name}", std::process::id()))
}

fn write(path: &Path, contents: &str) {
    std::fs::write(path, contents).unwrap();
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn stderr_kind(out: &Output) -> String {
    let v: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    v["error"]["kind"].as_str().unwrap().to_string()
}

/// Small synthetic panel on disk, reused across tests.
fn panel_fixture() -> PathBuf {
    let path = tmp("fixture.csv");
    if !path.exists() {
        let out = run(&[
            "simulate",
            "--m",
            "0.05",
            "--clusters",
            "12",
            "--n-min",
            "15",
            "--n-max",
            "15",
            "--seed",
            "7",
            "--emit-data",
            path.to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    path
}

#[test]
fn validation_errors_exit_2() {
    let bad = tmp("bad.csv");
    write(
        &bad,
        "contest_id,precinct_id,y,t,x\na,p1,1.4,1,0.5\nb,p1,0.4,0,0.5\n",
    );
    let out = run(&["fit", "--data", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_kind(&out), "RangeViolation");

    let degen = tmp("degen.csv");
    write(
        &degen,
        "contest_id,precinct_id,y,t,x\na,p1,0.5,1,0.5\nb,p1,0.4,1,0.5\n",
    );
    let out = run(&["fit", "--data", degen.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_kind(&out), "DegenerateTreatment");
}

#[test]
fn numeric_failures_exit_3() {
    // identical x everywhere: X⁰Û and X¹Û are proportional
    let collinear = tmp("collinear.csv");
    write(
        &collinear,
        "contest_id,precinct_id,y,t,x\n\
         a,p1,0.5,1,0.5\na,p2,0.6,1,0.5\nb,p1,0.4,0,0.5\nb,p2,0.3,0,0.5\n",
    );
    let out = run(&[
        "fit",
        "--data",
        collinear.to_str().unwrap(),
        "--spec",
        "linear",
        "--learner",
        "mean",
        "--folds",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stderr_kind(&out), "RankDeficient");
}

#[test]
fn invalid_simulate_config_exits_2() {
    let out = run(&[
        "simulate",
        "--treated-prob",
        "1.0",
        "--emit-data",
        tmp("never.csv").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_kind(&out), "InvalidConfig");
}

#[test]
fn mc_zero_reps_exits_2() {
    let out = run(&["mc", "--mc-reps", "0", "--clusters", "6", "--n-min", "5", "--n-max", "5"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_kind(&out), "InvalidConfig");
}

#[test]
fn simulate_is_byte_deterministic_and_writes_truth() {
    let a = tmp("sim-a.csv");
    let b = tmp("sim-b.csv");
    for path in [&a, &b] {
        let out = run(&[
            "simulate",
            "--m",
            "0.05",
            "--clusters",
            "8",
            "--n-min",
            "6",
            "--n-max",
            "10",
            "--seed",
            "99",
            "--emit-data",
            path.to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let truth: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(format!("{}.truth.json", a.display())).unwrap())
            .unwrap();
    assert_eq!(truth["true_f"][0], 0.05);
    assert_eq!(truth["true_f"][1], -0.1);
    assert_eq!(truth["true_mistakes"], 0.05);
    assert_eq!(truth["seed"], 99);
}

#[test]
fn fit_report_shape_cubic_vs_constant() {
    let data = panel_fixture();
    let common = [
        "--data",
        data.to_str().unwrap(),
        "--validation",
        "synthetic",
        "--learner",
        "linear",
        "--folds",
        "3",
        "--grid",
        "51",
        "--reps",
        "200",
    ];

    let mut args = vec!["fit", "--spec", "cubic"];
    args.extend_from_slice(&common);
    let cubic = stdout_json(&run(&args));
    assert_eq!(cubic["coefficients"].as_array().unwrap().len(), 4);
    assert!(cubic["tests"]["zero"].is_object());
    assert!(cubic["tests"]["homogeneous"].is_object());
    assert!(cubic["tests"]["linearity"].is_object());
    assert!(cubic["mistakes"]["point"].is_number());
    assert_eq!(cubic["curve"]["grid"].as_array().unwrap().len(), 51);

    let mut args = vec!["fit", "--spec", "constant"];
    args.extend_from_slice(&common);
    let constant = stdout_json(&run(&args));
    assert_eq!(constant["coefficients"].as_array().unwrap().len(), 1);
    assert!(constant["tests"]["homogeneous"].is_null());
    assert!(constant["tests"]["linearity"].is_null());
}

#[test]
fn sup_test_is_deterministic_and_flags_low_m() {
    let data = panel_fixture();
    let base = [
        "test",
        "--data",
        data.to_str().unwrap(),
        "--validation",
        "synthetic",
        "--method",
        "sup",
        "--learner",
        "linear",
        "--folds",
        "3",
        "--grid",
        "51",
        "--seed",
        "5",
    ];

    let mut args = base.to_vec();
    args.extend_from_slice(&["--reps", "500"]);
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.stdout, b.stdout);
    let report = stdout_json(&a);
    assert!(report["sup"]["zero_sup"]["p_value"].is_number());
    assert!(report["sup"]["homogeneous_sup"]["p_value"].is_number());
    assert!(report["wald"].is_null());

    let mut args = base.to_vec();
    args.extend_from_slice(&["--reps", "1"]);
    let low = stdout_json(&run(&args));
    let p = low["sup"]["zero_sup"]["p_value"].as_f64().unwrap();
    assert!(p == 0.0 || p == 1.0);
    let warnings = low["warnings"].as_array().unwrap();
    assert!(
        warnings.iter().any(|w| w.as_str().unwrap().contains("resolution")),
        "{warnings:?}"
    );
}

#[test]
fn config_file_values_apply_and_flags_override() {
    let data = panel_fixture();
    let cfg = tmp("run.conf");
    write(
        &cfg,
        &format!(
            "# analysis defaults\n\
             data={}\n\
             validation=synthetic\n\
             spec=constant\n\
             learner=mean\n\
             folds=3\n\
             grid=21\n\
             reps=100\n",
            data.display()
        ),
    );

    // file only: constant spec -> 1 coefficient
    let from_file = stdout_json(&run(&["fit", "--config", cfg.to_str().unwrap()]));
    assert_eq!(from_file["coefficients"].as_array().unwrap().len(), 1);
    assert_eq!(from_file["provenance"]["learner"], "mean");

    // flag overrides file: linear spec -> 2 coefficients
    let overridden = stdout_json(&run(&[
        "fit",
        "--config",
        cfg.to_str().unwrap(),
        "--spec",
        "linear",
    ]));
    assert_eq!(overridden["coefficients"].as_array().unwrap().len(), 2);
}

#[test]
fn curve_csv_has_documented_columns() {
    let data = panel_fixture();
    let curve = tmp("curve.csv");
    let out = run(&[
        "band",
        "--data",
        data.to_str().unwrap(),
        "--validation",
        "synthetic",
        "--learner",
        "linear",
        "--folds",
        "3",
        "--grid",
        "21",
        "--reps",
        "100",
        "--csv-curve",
        curve.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&curve).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "x,f_hat,se,pw_lo,pw_hi,uni_lo,uni_hi"
    );
    assert_eq!(lines.count(), 21);
}

#[test]
fn unknown_method_exits_2() {
    let data = panel_fixture();
    let out = run(&[
        "test",
        "--data",
        data.to_str().unwrap(),
        "--validation",
        "synthetic",
        "--method",
        "bayes",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_kind(&out), "InvalidConfig");
}
