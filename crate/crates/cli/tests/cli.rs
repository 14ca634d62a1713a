use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_margin-discrim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("valid JSON")
}

#[test]
fn solve_examples() {
    let v = json(&run(&[
        "solve",
        "--fidelity",
        "0.9",
        "--margin",
        "0",
        "--condition",
        "strong",
    ]));
    assert!((v["p_success"].as_f64().unwrap() - 0.1).abs() < 1e-12);
    assert_eq!(v["report"]["psd_ok"], true);

    let v = json(&run(&[
        "solve",
        "--fidelity",
        "0.9",
        "--margin",
        "0.3",
        "--condition",
        "strong",
        "--oracle",
    ]));
    assert!((v["p_success"].as_f64().unwrap() - 0.71794).abs() < 1e-5);
    assert_eq!(v["regime"], "minimum-error");
    assert!(v["oracle"]["delta"].as_f64().unwrap().abs() < 1e-8);
}

#[test]
fn input_errors_exit_with_two() {
    let out = run(&["solve", "--fidelity", "1.0", "--margin", "0.1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("|<phi1|phi2>| != 1"));
    assert_eq!(
        run(&["solve", "--fidelity", "0.5", "--margin", "1.5"]).status.code(),
        Some(2)
    );
    assert_eq!(run(&["solve", "--fidelity", "0.5"]).status.code(), Some(2));
    assert_eq!(
        run(&["curve", "--fidelity", "0.5", "--m-steps", "1"]).status.code(),
        Some(2)
    );
    assert_eq!(
        run(&[
            "oracle",
            "--fidelity",
            "0.5",
            "--margin",
            "0.1",
            "--mode",
            "general",
            "--budget",
            "10"
        ])
        .status
        .code(),
        Some(2)
    );
    assert_eq!(
        run(&["locc", "--phi1", "ghz", "--phi2", "bell", "--margin", "0"])
            .status
            .code(),
        Some(2)
    );
    let out = Command::new(env!("CARGO_BIN_EXE_margin-discrim"))
        .args(["curve", "--fidelity", "0.5"])
        .env("MARGIN_DISCRIM_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn curve_is_byte_stable_and_written_to_file() {
    let dir = std::env::temp_dir().join(format!("margin-discrim-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("curve.csv");
    let out = run(&[
        "curve",
        "--fidelity",
        "0.9",
        "--m-steps",
        "11",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let file = std::fs::read(&path).unwrap();
    let again = run(&["curve", "--fidelity", "0.9", "--m-steps", "11"]);
    assert_eq!(file, again.stdout);
    let text = String::from_utf8(file).unwrap();
    assert_eq!(text.lines().count(), 12);
    assert!(text.starts_with("m,p_strong,p_weak,p_unambiguous,p_minimum_error\n"));
    assert!(text.contains("\n0.100000000000,0.225000000000,0.400000000000,"));
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn oracle_and_simulate_emit_json() {
    for mode in ["reduced", "general"] {
        let v = json(&run(&[
            "oracle",
            "--fidelity",
            "0.9",
            "--margin",
            "0.1",
            "--mode",
            mode,
            "--seed",
            "3",
        ]));
        assert!((v["p_best"].as_f64().unwrap() - 0.225).abs() < 1e-4, "{mode}");
        assert_eq!(v["feasible"], true);
    }
    let args = [
        "simulate",
        "--fidelity",
        "0.9",
        "--margin",
        "0.1",
        "--shots",
        "20000",
        "--seed",
        "9",
    ];
    let (a, b) = (json(&run(&args)), json(&run(&args)));
    assert_eq!(a, b);
    assert_eq!(a["shots"], 20000);
}

#[test]
fn locc_accepts_presets_and_matrices() {
    let v = json(&run(&[
        "locc",
        "--phi1",
        "bell",
        "--phi2",
        "[[0.5, [0, 0.5]], [0.5, 0.1]]",
        "--margin",
        "0.05",
        "--condition",
        "weak",
    ]));
    assert!(v["max_deviation"].as_f64().unwrap() <= 1e-8);
    let (g, l) = (
        v["p_success_global"].as_f64().unwrap(),
        v["p_success_locc"].as_f64().unwrap(),
    );
    assert!((g - l).abs() <= 1e-8);
    assert!((l - v["p_success_closed_form"].as_f64().unwrap()).abs() <= 1e-8);
    assert!(!v["branch_slacks"].as_array().unwrap().is_empty());
}
