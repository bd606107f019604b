//! End-to-end exercises of every subcommand through the binary.

use std::path::Path;
use std::process::{Command, Output};

fn ace(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ace"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

#[test]
fn check_graph_reports_identifiability_and_witnesses() {
    let dir = tempfile::tempdir().unwrap();
    let bow = dir.path().join("bow.json");
    write(
        &bow,
        r#"{"observed": ["X", "Y"], "directed": [["X", "Y"]], "bidirected": [["X", "Y"]]}"#,
    );
    let out = ace(&["check-graph", "--graph", bow.to_str().unwrap(), "--y", "Y", "--x", "X"]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["identifiable"], false);
    assert_eq!(report["available_for_modeling"], false);
    assert_eq!(report["hedge_witness"]["root_set"][0], "Y");

    let backdoor = dir.path().join("backdoor.json");
    write(
        &backdoor,
        r#"{"observed": ["X", "Y", "Z"],
            "directed": [["Z", "X"], ["Z", "Y"], ["X", "Y"]],
            "bidirected": []}"#,
    );
    let out = ace(&[
        "check-graph",
        "--graph",
        backdoor.to_str().unwrap(),
        "--y",
        "Y",
        "--x",
        "X",
        "--z",
        "Z",
    ]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["identifiable"], true);
    // Z -> X exists, so direct modeling is unavailable.
    assert_eq!(report["available_for_modeling"], false);
    assert_eq!(report["theorem1_preconditions"]["x_in_ancestors"], true);
    assert_eq!(report["theorem1_preconditions"]["z_de_empty"], true);
    assert_eq!(report["hedge_witness"], serde_json::Value::Null);
}

#[test]
fn simulate_build_estimate_batch_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    let out = ace(&[
        "simulate",
        "paper",
        "--n",
        "1000",
        "--seed",
        "42",
        "--out",
        data.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&data).unwrap();
    assert!(text.starts_with("Z,X,Y"));
    assert_eq!(text.lines().count(), 1001);

    // Determinism across invocations.
    let data2 = dir.path().join("data2.csv");
    ace(&["simulate", "paper", "--n", "1000", "--seed", "42", "--out", data2.to_str().unwrap()]);
    assert_eq!(text, std::fs::read_to_string(&data2).unwrap());

    let cfg = dir.path().join("pipeline.toml");
    write(
        &cfg,
        r#"
            outcome = "Y"
            treatments = ["X"]
            covariates = ["Z"]
            [learners.default]
            kind = "gradient-boosted-trees"
            n_trees = 60
            seed = 1
        "#,
    );
    let graph = dir.path().join("graph.json");
    write(
        &graph,
        r#"{"observed": ["Z", "X", "Y"],
            "directed": [["X", "Y"], ["Z", "Y"]],
            "bidirected": []}"#,
    );
    let model = dir.path().join("model.ace");
    let out = ace(&[
        "build",
        "--data",
        data.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        model.to_str().unwrap(),
        "--graph",
        graph.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["models_fit"], 3);
    assert_eq!(report["preconditions"]["available_for_modeling"], true);

    // Without a graph the preconditions stay unverified.
    let model2 = dir.path().join("model2.ace");
    let out = ace(&[
        "build",
        "--data",
        data.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        model2.to_str().unwrap(),
    ]);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["preconditions"], "unverified");

    let out = ace(&[
        "estimate",
        "--model",
        model.to_str().unwrap(),
        "--x",
        "0.6",
        "--z",
        "0.5",
    ]);
    assert!(out.status.success());
    let value: f64 = String::from_utf8_lossy(&out.stdout).trim().parse().unwrap();
    assert!((value - 0.3).abs() < 0.1, "estimate {value} far from 0.5*0.6");

    let requests = dir.path().join("requests.csv");
    write(&requests, "X,Z\n0.6,0.5\n0.2,0.5\n0.6,0.5\n");
    let estimates = dir.path().join("estimates.csv");
    let out = ace(&[
        "estimate-batch",
        "--model",
        model.to_str().unwrap(),
        "--requests",
        requests.to_str().unwrap(),
        "--out",
        estimates.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&estimates).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "X,Z,estimate");
    assert_eq!(lines.len(), 4);
    let first: f64 = lines[1].split(',').next_back().unwrap().parse().unwrap();
    assert!((first - value).abs() < 1e-12, "batch disagrees with scalar");
    assert_eq!(lines[1], lines[3], "duplicate rows give duplicate outputs");
}

#[test]
fn simulate_linear_uses_a_spec_file() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("linear.toml");
    write(
        &spec,
        r#"
            [[variables]]
            name = "Z"
            noise = 1.0
            [[variables]]
            name = "X"
            parents = [["Z", 0.7]]
            noise = 0.5
            [[variables]]
            name = "Y"
            parents = [["X", 1.5], ["Z", -0.8]]
            noise = 0.3
        "#,
    );
    let out_csv = dir.path().join("linear.csv");
    let out = ace(&[
        "simulate",
        "linear",
        "--spec",
        spec.to_str().unwrap(),
        "--n",
        "50",
        "--seed",
        "3",
        "--out",
        out_csv.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&out_csv).unwrap();
    assert!(text.starts_with("Z,X,Y"));
    assert_eq!(text.lines().count(), 51);
}

#[test]
fn oracle_eval_answers_interventional_queries() {
    let dir = tempfile::tempdir().unwrap();
    let scm = dir.path().join("scm.json");
    write(
        &scm,
        r#"{
            "graph": {"observed": ["Z", "X", "Y"],
                      "directed": [["Z", "X"], ["Z", "Y"], ["X", "Y"]],
                      "bidirected": []},
            "cardinalities": {"Z": 2, "X": 2, "Y": 2},
            "cpts": {
                "Z": [0.5, 0.5],
                "X": [[0.8, 0.2], [0.2, 0.8]],
                "Y": [[[0.9, 0.1], [0.6, 0.4]], [[0.4, 0.6], [0.1, 0.9]]]
            }
        }"#,
    );
    let out = ace(&[
        "oracle",
        "eval",
        "--scm",
        scm.to_str().unwrap(),
        "--do",
        "X=1",
        "--targets",
        "Y",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let p_y1 = table["probabilities"][1].as_f64().unwrap();
    assert!((p_y1 - 0.75).abs() < 1e-12, "P(Y=1|do(X=1)) = {p_y1}");

    let out = ace(&[
        "oracle",
        "eval",
        "--scm",
        scm.to_str().unwrap(),
        "--do",
        "X=1",
        "--targets",
        "Y",
        "--given",
        "Z=1",
    ]);
    let table: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let p = table["probabilities"][1].as_f64().unwrap();
    assert!((p - 0.9).abs() < 1e-12);
}

#[test]
fn experiment_check_gate_fails_on_breach() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    write(
        &cfg,
        r#"
            n_samples = 400
            seed = 5
            max_mae = 0.000001

            [generator]
            kind = "paper-model"

            [pipeline]
            outcome = "Y"
            treatments = ["X"]
            covariates = ["Z"]
            [pipeline.learners.default]
            kind = "least-squares"
            degree = 2
        "#,
    );
    let out_dir = dir.path().join("results");
    let out = ace(&[
        "experiment",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--check",
    ]);
    assert!(!out.status.success(), "an impossible tolerance must fail the gate");
    assert!(String::from_utf8_lossy(&out.stderr).contains("exceeds"));
    // Results are still written for inspection.
    assert!(out_dir.join("results.csv").exists());
    assert!(out_dir.join("summary.json").exists());
}

#[test]
fn bad_inputs_produce_clean_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cyclic = dir.path().join("cyclic.json");
    write(
        &cyclic,
        r#"{"observed": ["A", "B"], "directed": [["A", "B"], ["B", "A"]], "bidirected": []}"#,
    );
    let out = ace(&["check-graph", "--graph", cyclic.to_str().unwrap(), "--y", "B", "--x", "A"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("cycle"));

    let bad_csv = dir.path().join("bad.csv");
    write(&bad_csv, "X,Y\n1,abc\n");
    let cfg = dir.path().join("cfg.toml");
    write(&cfg, "outcome = \"Y\"\ntreatments = [\"X\"]\n");
    let out = ace(&[
        "build",
        "--data",
        bad_csv.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().join("m.ace").to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("row 1") && err.contains('Y'), "unhelpful error: {err}");
}
