use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
        .to_str()
        .unwrap()
        .to_owned()
}

fn tokbrier(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tokbrier"))
        .args(args)
        .env_remove("TOKBRIER_CONFIG")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(dir: &tempfile::TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(p: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn svg_elements(p: &Path, class: &str) -> usize {
    let text = std::fs::read_to_string(p).unwrap();
    let doc = roxmltree::Document::parse(&text).expect("SVG is well-formed XML");
    doc.descendants()
        .filter(|n| n.attribute("class") == Some(class))
        .count()
}

#[test]
fn eval_four_record_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let report = path(&dir, "m.json");
    let diagram = path(&dir, "d.csv");
    let o = tokbrier(&[
        "eval",
        "--input",
        &fixture("ece_four.jsonl"),
        "--out",
        s(&report),
        "--diagram",
        s(&diagram),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v = json(&report);
    assert_eq!(v["ece"], 0.3);
    assert_eq!(v["n"], 4);
    assert_eq!(v["accuracy"], 0.25);
    let printed: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(printed, v);
    let csv = std::fs::read_to_string(&diagram).unwrap();
    assert!(csv.starts_with("bin_lower,bin_upper,count,mean_confidence,accuracy\n"));
    assert_eq!(csv.lines().count(), 11);
}

#[test]
fn eval_separated_and_single_class() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(&dir, "m.json");
    let o = tokbrier(&["eval", "--input", &fixture("separated.jsonl"), "--out", s(&out)]);
    assert!(o.status.success());
    assert_eq!(json(&out)["auroc"], 1.0);

    let o = tokbrier(&["eval", "--input", &fixture("single_class.jsonl"), "--out", s(&out)]);
    assert!(o.status.success());
    assert!(json(&out)["auroc"].is_null());
    assert!(stderr(&o).contains("warning"), "{}", stderr(&o));
}

#[test]
fn eval_validation_messages() {
    let o = tokbrier(&["eval", "--input", &fixture("empty.jsonl")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("no records"));

    let o = tokbrier(&["eval", "--input", &fixture("bad_label.jsonl")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    let o = tokbrier(&["eval", "--input", &fixture("percent.jsonl")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(
        stderr(&o).contains("line 2") && stderr(&o).contains("fraction"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn verify_psr_examples() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(&dir, "v.json");
    let o = tokbrier(&[
        "verify-psr",
        "--scale-n",
        "1",
        "--eta",
        "0.5",
        "--samples",
        "1000",
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let r = &json(&out)[0];
    assert_eq!(r["tie"], true);
    assert_eq!(r["argmin_vertices"], serde_json::json!([0, 1]));

    let o = tokbrier(&[
        "verify-psr",
        "--scale-n",
        "10",
        "--eta",
        "1.0",
        "--samples",
        "1000",
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let r = &json(&out)[0];
    assert_eq!(r["argmin_vertices"], serde_json::json!([10]));
    assert_eq!(r["min_risk"], 0.0);
}

#[test]
fn verify_psr_reports_failures_with_code_2() {
    let o = tokbrier(&[
        "verify-psr",
        "--scale-n",
        "10",
        "--points",
        "11",
        "--samples",
        "100",
        "--rule",
        "absolute",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("eta = 0.1"), "{}", stdout(&o));
}

#[test]
fn train_constant_target() {
    let dir = tempfile::tempdir().unwrap();
    let head = path(&dir, "head.json");
    let o = tokbrier(&["--set", "scale_n=10", "train", "--eta", "constant:1", "--out", s(&head)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = json(&path(&dir, "head.report.json"));
    assert!(report["oracle_token_agreement"].as_f64().unwrap() >= 0.99, "{report}");
    assert_eq!(report["epoch_loss"].as_array().unwrap().len(), 30);
    assert_eq!(json(&head)["dims"], serde_json::json!([4, 64, 11]));
}

#[test]
fn generate_then_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let records = path(&dir, "r.jsonl");
    let o = tokbrier(&[
        "generate",
        "--eta",
        "logistic:1.5,-1:0.3",
        "--count",
        "500",
        "--scale-n",
        "100",
        "--seed",
        "9",
        "--out",
        s(&records),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let anti = path(&dir, "anti.jsonl");
    let o = tokbrier(&[
        "generate",
        "--eta",
        "logistic:1.5,-1:0.3",
        "--count",
        "500",
        "--scale-n",
        "100",
        "--seed",
        "9",
        "--predictor",
        "anti",
        "--out",
        s(&anti),
    ]);
    assert!(o.status.success());

    let mut curves = Vec::new();
    for input in [&records, &anti] {
        let out = path(&dir, "c.json");
        let o = tokbrier(&[
            "simulate-cascade",
            "--input",
            s(input),
            "--budgets",
            "0,50,100,200",
            "--budget",
            "100",
            "--out",
            s(&out),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        let v = json(&out);
        assert_eq!(v["outcome"]["triggered_count"], 100);
        curves.push(v["curve"].clone());
    }
    for (cal, anti) in curves[0].as_array().unwrap().iter().zip(curves[1].as_array().unwrap()) {
        assert!(cal["expected_accuracy"].as_f64() >= anti["expected_accuracy"].as_f64());
    }

    let o = tokbrier(&["simulate-cascade", "--input", s(&records), "--budgets", "0"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("budget      0"));

    let o = tokbrier(&["simulate-cascade", "--input", s(&records), "--budgets", "0,501"]);
    assert_eq!(o.status.code(), Some(1));
    let o = tokbrier(&["simulate-cascade", "--input", s(&records), "--budget", "501"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn selfcorrect_with_nothing_below_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(&dir, "s.json");
    let trace = path(&dir, "t.csv");
    let o = tokbrier(&[
        "simulate-selfcorrect",
        "--input",
        &fixture("single_class.jsonl"),
        "--out",
        s(&out),
        "--trace",
        s(&trace),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v = json(&out);
    assert_eq!(v["accuracy_before"], v["accuracy_after"]);
    assert_eq!(v["triggered_count"], 0);
    let t = std::fs::read_to_string(&trace).unwrap();
    assert!(t.starts_with("id,confidence,decision,correct_before,correct_after\n"));
}

#[test]
fn plot_diagrams_and_curves() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(&dir, "p.svg");

    assert!(
        tokbrier(&["plot", "--input", &fixture("diagram_one_bar.csv"), "--out", s(&out)])
            .status
            .success()
    );
    assert_eq!(svg_elements(&out, "bar"), 1);
    assert_eq!(svg_elements(&out, "identity"), 1);

    assert!(
        tokbrier(&["plot", "--input", &fixture("diagram_calibrated.csv"), "--out", s(&out)])
            .status
            .success()
    );
    assert_eq!(svg_elements(&out, "bar"), 4);
    assert_eq!(svg_elements(&out, "gap"), 0);

    assert!(
        tokbrier(&["plot", "--input", &fixture("diagram_ten.csv"), "--out", s(&out)])
            .status
            .success()
    );
    assert_eq!(svg_elements(&out, "bar"), 10);

    assert!(tokbrier(&["plot", "--input", &fixture("curve.csv"), "--out", s(&out)])
        .status
        .success());
    assert_eq!(svg_elements(&out, "curve"), 1);
    assert_eq!(svg_elements(&out, "point"), 5);

    let o = tokbrier(&["plot", "--input", &fixture("wrong_schema.csv"), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("missing: expected_accuracy"), "{}", stderr(&o));
}

#[test]
fn eval_diagram_plots_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let diagram = path(&dir, "d.csv");
    let svg = path(&dir, "d.svg");
    assert!(
        tokbrier(&["eval", "--input", &fixture("ece_four.jsonl"), "--diagram", s(&diagram)])
            .status
            .success()
    );
    assert!(tokbrier(&["plot", "--input", s(&diagram), "--out", s(&svg)])
        .status
        .success());
    assert_eq!(svg_elements(&svg, "bar"), 2);
    assert_eq!(svg_elements(&svg, "gap"), 2);
}

#[test]
fn config_sources() {
    let o = tokbrier(&["--config", &fixture("unknown_key.conf"), "show-config"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("learning_rte"));

    let o = Command::new(env!("CARGO_BIN_EXE_tokbrier"))
        .args(["--set", "bins=7", "show-config"])
        .env("TOKBRIER_CONFIG", fixture("run.conf"))
        .output()
        .unwrap();
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(
        text.contains("scale_n = 10") && text.contains("bins = 7") && text.contains("seed = 7"),
        "{text}"
    );
}
