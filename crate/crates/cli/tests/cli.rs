//! End-to-end tests against the built binary.

use std::path::Path;
use std::process::{Command, Output};

fn selval(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_selval"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    assert!(
        output.status.success(),
        "exit {:?}, stderr: {}",
        output.status.code(),
        String::from_utf8_lossy(&output.stderr)
    );
    String::from_utf8(output.stdout.clone()).unwrap()
}

#[test]
fn threshold_prints_break_even() {
    let dir = tempfile::tempdir().unwrap();
    let out = stdout(&selval(&["threshold", "--k", "1"], dir.path()));
    assert_eq!(out.trim(), "0.5");
    let out = stdout(&selval(&["threshold", "--k", "0"], dir.path()));
    assert_eq!(out.trim(), "0");
    let out = stdout(&selval(
        &["threshold", "--k", "1", "--format", "json"],
        dir.path(),
    ));
    let policy: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(policy["kind"], "global");
    assert_eq!(policy["tau"], 0.5);
}

#[test]
fn synth_then_value_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    stdout(&selval(
        &["synth", "--model", "m1", "--items", "1000", "--seed", "7", "--output", "m1.jsonl"],
        dir.path(),
    ));
    let out = stdout(&selval(
        &["value", "--data", "m1.jsonl", "--k", "1", "--rule", "theoretical"],
        dir.path(),
    ));
    let value: f64 = out.trim().parse().unwrap();
    assert!((value - 0.2).abs() < 1e-6, "{out}");
}

#[test]
fn curve_csv_contract() {
    let dir = tempfile::tempdir().unwrap();
    stdout(&selval(
        &["synth", "--model", "m2", "--items", "400", "--seed", "1", "--output", "t.jsonl"],
        dir.path(),
    ));
    stdout(&selval(
        &["synth", "--model", "m2", "--items", "400", "--seed", "2", "--output", "v.jsonl"],
        dir.path(),
    ));
    let out = stdout(&selval(
        &[
            "curve",
            "--test",
            "t.jsonl",
            "--tune",
            "v.jsonl",
            "--rules",
            "theoretical,empirical_tune",
            "--format",
            "csv",
        ],
        dir.path(),
    ));
    let mut lines = out.lines();
    assert_eq!(lines.next().unwrap(), "model,rule,k,tau,rho,alpha,value");
    // 41 grid points per rule, two rules.
    assert_eq!(out.lines().count(), 1 + 41 * 2);
    let first = lines.next().unwrap();
    assert!(first.starts_with("t,theoretical,0.000000,"), "{first}");

    // Byte-identical on rerun.
    let again = stdout(&selval(
        &[
            "curve",
            "--test",
            "t.jsonl",
            "--tune",
            "v.jsonl",
            "--rules",
            "theoretical,empirical_tune",
            "--format",
            "csv",
        ],
        dir.path(),
    ));
    assert_eq!(out, again);
}

#[test]
fn compare_markdown_table() {
    let dir = tempfile::tempdir().unwrap();
    for (model, seed) in [("m1", "1"), ("m2", "2"), ("m3", "3")] {
        stdout(&selval(
            &[
                "synth", "--model", model, "--items", "1000", "--seed", seed, "--output",
                &format!("{model}.jsonl"),
            ],
            dir.path(),
        ));
    }
    let out = stdout(&selval(
        &[
            "compare",
            "--model",
            "m1=m1.jsonl",
            "--model",
            "m2=m2.jsonl",
            "--model",
            "m3=m3.jsonl",
            "--format",
            "md",
        ],
        dir.path(),
    ));
    assert!(out.contains("| model | accuracy |"), "{out}");
    assert!(out.contains("best by accuracy: m1"), "{out}");
    assert!(out.contains("value winner differs"), "{out}");
}

#[test]
fn calibrate_fit_save_apply() {
    let dir = tempfile::tempdir().unwrap();
    stdout(&selval(
        &[
            "synth", "--model", "calibrated", "--items", "5000", "--classes", "4",
            "--concentration", "0.5", "--seed", "9", "--output", "cal.jsonl",
        ],
        dir.path(),
    ));
    stdout(&selval(
        &["calibrate", "--tune", "cal.jsonl", "--save", "scaler.json"],
        dir.path(),
    ));
    let scaler: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("scaler.json")).unwrap())
            .unwrap();
    let temperature = scaler["temperature"].as_f64().unwrap();
    assert!((temperature - 1.0).abs() < 0.1, "T = {temperature}");
    stdout(&selval(
        &[
            "calibrate", "--scaler", "scaler.json", "--apply", "cal.jsonl", "--output",
            "rescaled.jsonl",
        ],
        dir.path(),
    ));
    let out = stdout(&selval(
        &["value", "--data", "rescaled.jsonl", "--k", "0", "--rule", "theoretical"],
        dir.path(),
    ));
    let base = stdout(&selval(
        &["value", "--data", "cal.jsonl", "--k", "0", "--rule", "theoretical"],
        dir.path(),
    ));
    assert_eq!(out, base, "accuracy invariant under temperature");
}

#[test]
fn abece_output_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    stdout(&selval(
        &["synth", "--model", "m1", "--items", "500", "--seed", "4", "--output", "m1.jsonl"],
        dir.path(),
    ));
    let args = [
        "abece", "--data", "m1.jsonl", "--sample-size", "20", "--num-samples", "1000", "--seed",
        "7", "--format", "json",
    ];
    let a = stdout(&selval(&args, dir.path()));
    let b = stdout(&selval(&args, dir.path()));
    assert_eq!(a, b);
    let report: serde_json::Value = serde_json::from_str(&a).unwrap();
    assert_eq!(report["bins"].as_array().unwrap().len(), 21);

    let csv = stdout(&selval(
        &["abece", "--data", "m1.jsonl", "--seed", "7", "--format", "csv"],
        dir.path(),
    ));
    assert!(csv.starts_with("a,mass,mean_conf,residual\n"), "{csv}");
}

#[test]
fn density_csv_contract() {
    let dir = tempfile::tempdir().unwrap();
    stdout(&selval(
        &["synth", "--model", "m2", "--items", "300", "--seed", "5", "--output", "m2.jsonl"],
        dir.path(),
    ));
    let csv = stdout(&selval(
        &[
            "density", "--data", "m2.jsonl", "--sample-size", "10", "--num-samples", "200",
            "--seed", "3", "--format", "csv",
        ],
        dir.path(),
    ));
    assert!(csv.starts_with("a,conf_lo,conf_hi,mass\n"), "{csv}");
    // 11 accuracy levels x 20 confidence bins.
    assert_eq!(csv.lines().count(), 1 + 11 * 20);
}

#[test]
fn gain_worked_case() {
    let dir = tempfile::tempdir().unwrap();
    stdout(&selval(
        &[
            "synth", "--model", "custom", "--component", "1.0:0.8:0.6", "--items", "1000",
            "--seed", "6", "--output", "before.jsonl",
        ],
        dir.path(),
    ));
    stdout(&selval(
        &[
            "calibrate", "--tune", "before.jsonl", "--apply", "before.jsonl", "--output",
            "after.jsonl",
        ],
        dir.path(),
    ));
    let out = stdout(&selval(
        &[
            "gain", "--before", "before.jsonl", "--after", "after.jsonl", "--k", "4", "--format",
            "json",
        ],
        dir.path(),
    ));
    let gain: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(gain["argmax_equal"], true);
    assert!(gain["gain"].as_f64().unwrap() >= 0.0, "{out}");
}

#[test]
fn exit_codes_by_error_class() {
    let dir = tempfile::tempdir().unwrap();
    // I/O failure: 2.
    let missing = selval(&["value", "--data", "missing.jsonl", "--k", "1"], dir.path());
    assert_eq!(missing.status.code(), Some(2));
    // Unknown flag: usage text, 1.
    let unknown = selval(&["value", "--no-such-flag"], dir.path());
    assert_eq!(unknown.status.code(), Some(1));
    assert!(
        String::from_utf8_lossy(&unknown.stderr).to_lowercase().contains("usage"),
        "{}",
        String::from_utf8_lossy(&unknown.stderr)
    );
    // Validation failure: 1.
    stdout(&selval(
        &["synth", "--model", "m1", "--items", "100", "--seed", "1", "--output", "d.jsonl"],
        dir.path(),
    ));
    let invalid = selval(
        &["value", "--data", "d.jsonl", "--k", "-3", "--rule", "theoretical"],
        dir.path(),
    );
    assert_eq!(invalid.status.code(), Some(1));
    // Malformed data: 1, with the line number in the message.
    std::fs::write(dir.path().join("bad.jsonl"), "{\"id\":\"a\"\n").unwrap();
    let malformed = selval(&["value", "--data", "bad.jsonl", "--k", "1"], dir.path());
    assert_eq!(malformed.status.code(), Some(1));
    assert!(
        String::from_utf8_lossy(&malformed.stderr).contains(":1:"),
        "{}",
        String::from_utf8_lossy(&malformed.stderr)
    );
    // Help: 0.
    let help = selval(&["--help"], dir.path());
    assert_eq!(help.status.code(), Some(0));
}

#[test]
fn config_file_mirrors_flags() {
    let dir = tempfile::tempdir().unwrap();
    stdout(&selval(
        &["synth", "--model", "m3", "--items", "300", "--seed", "8", "--output", "t.jsonl"],
        dir.path(),
    ));
    std::fs::write(
        dir.path().join("cfg.json"),
        r#"{"k_max":2.0,"k_step":0.5,"rules":["theoretical"]}"#,
    )
    .unwrap();
    let out = stdout(&selval(
        &["curve", "--test", "t.jsonl", "--config", "cfg.json", "--format", "csv"],
        dir.path(),
    ));
    // 5 grid points: 0, 0.5, 1, 1.5, 2.
    assert_eq!(out.lines().count(), 1 + 5);
}

#[test]
fn logits_accepted_via_kind_flag() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("logits.jsonl"),
        "{\"id\":\"a\",\"scores\":[2.0,2.0],\"label\":1}\n{\"id\":\"b\",\"scores\":[3.0,0.0],\"label\":0}\n",
    )
    .unwrap();
    let out = stdout(&selval(
        &[
            "value", "--data", "logits.jsonl", "--kind", "logits", "--k", "0", "--rule",
            "theoretical", "--format", "json",
        ],
        dir.path(),
    ));
    let point: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(point["rho"], 0.0);
    assert_eq!(point["value"], 0.5);
}

#[test]
fn averaged_curve_across_pairs() {
    let dir = tempfile::tempdir().unwrap();
    for seed in ["1", "2", "3", "4"] {
        stdout(&selval(
            &[
                "synth", "--model", "m2", "--items", "200", "--seed", seed, "--output",
                &format!("d{seed}.jsonl"),
            ],
            dir.path(),
        ));
    }
    let out = stdout(&selval(
        &[
            "curve",
            "--pair",
            "d1.jsonl:d2.jsonl",
            "--pair",
            "d3.jsonl:d4.jsonl",
            "--average",
            "--rules",
            "theoretical",
            "--format",
            "csv",
        ],
        dir.path(),
    ));
    assert_eq!(out.lines().count(), 1 + 41);
    assert!(out.lines().nth(1).unwrap().starts_with("average,"), "{out}");
}
