use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_posthoc"))
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok_json(args: &[&str]) -> (Value, Vec<u8>) {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    (serde_json::from_slice(&out.stdout).expect("valid JSON"), out.stdout)
}

fn worked_file(dir: &Path) -> PathBuf {
    let path = dir.join("worked.csv");
    std::fs::write(&path, "id,p\ng1,0.01\ng2,0.05\ng3,0.2\ng4,0.35\n").unwrap();
    path
}

fn demo_args<'a>(extra: &[&'a str]) -> Vec<String> {
    let mut args: Vec<String> = vec![
        "--data".into(),
        data("demo_matrix.csv").display().to_string(),
        "--labels".into(),
        data("demo_labels.csv").display().to_string(),
    ];
    args.extend(extra.iter().map(|s| s.to_string()));
    args
}

fn demo(cmd: &str, extra: &[&str]) -> (Value, Vec<u8>) {
    let mut args = vec![cmd.to_string()];
    args.extend(demo_args(extra));
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    ok_json(&refs)
}

fn validator() -> jsonschema::Validator {
    let text = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/report.schema.json")).unwrap();
    jsonschema::validator_for(&serde_json::from_str(&text).unwrap()).expect("schema compiles")
}

fn assert_valid(v: &Value) {
    let errors: Vec<String> = validator().iter_errors(v).map(|e| format!("{} at {}", e, e.instance_path)).collect();
    assert!(errors.is_empty(), "{errors:#?}");
}

#[test]
fn worked_example() {
    let dir = tempfile::tempdir().unwrap();
    let p = worked_file(dir.path());
    let (v, _) = ok_json(&["bound", "--pvalues", p.to_str().unwrap(), "--alpha", "0.4", "--method", "simes"]);
    assert_eq!(v["selections"][0]["V"], 2);
    assert_eq!(v["selections"][0]["tp_lower"], 2);
    assert_eq!(v["selections"][0]["fdp_upper"], 0.5);
    assert_valid(&v);

    let (v, _) = ok_json(&["bound", "--pvalues", p.to_str().unwrap(), "--alpha", "0.4", "--method", "bonf", "--ids", "g1,g2"]);
    assert_eq!(v["method"], "bonf:1");
    assert_eq!(v["selections"][0]["V"], 0);
}

#[test]
fn golden_demo_report() {
    let (v, bytes) = demo(
        "bound",
        &["--method", "calibrated:linear", "--B", "200", "--seed", "7", "--select", "up=fc>0.15&bh:0.1", "--select-top", "25"],
    );
    assert_valid(&v);
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/demo_bound.json");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&golden, &bytes).unwrap();
    }
    let expected = std::fs::read(&golden).expect("golden file present (regenerate with UPDATE_GOLDEN=1)");
    assert_eq!(String::from_utf8_lossy(&bytes), String::from_utf8_lossy(&expected));
}

#[test]
fn deterministic_output() {
    let args = ["--method", "calibrated:beta", "--B", "150", "--seed", "3", "--select-top", "30"];
    let (_, a) = demo("bound", &args);
    let (_, b) = demo("bound", &args);
    assert_eq!(a, b);
    let (_, c) = demo("bound", &["--method", "calibrated:beta", "--B", "150", "--seed", "4", "--select-top", "30"]);
    assert_ne!(a, c, "a different seed should change the pivots");
}

#[test]
fn envelope_json_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("env.csv");
    let (v, _) = demo("envelope", &["--method", "simes", "--csv", csv.to_str().unwrap()]);
    assert_valid(&v);
    let env = &v["envelope"];
    assert_eq!(env["k"].as_array().unwrap().len(), 200);
    assert!(v["selections"].as_array().unwrap().is_empty());
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "k,id,V,tp_lower,fdp_upper");
    assert_eq!(lines.count(), 200);
}

#[test]
fn calibrate_reports_pivots() {
    let (v, _) = demo("calibrate", &["--template", "beta", "--B", "100", "--seed", "1"]);
    assert_valid(&v);
    let cal = &v["calibration"];
    assert_eq!(cal["template"], "beta");
    assert_eq!(cal["pivots"].as_array().unwrap().len(), 100);
    assert_eq!(cal["rank"], 6);
    assert_eq!(v["lambda"], cal["lambda"]);
    assert_eq!(v["provenance"]["B"], 100);
    assert_eq!(v["provenance"]["seed"], 1);
}

#[test]
fn spatial_command() {
    let ann = data("demo_annotations.csv");
    let (v, _) = demo(
        "spatial",
        &["--annotations", ann.to_str().unwrap(), "--chrom-col", "chrom", "--segment-size", "10", "--tree", "--select", "block=idx:1,2,3,4,5,6,7,8,9,10"],
    );
    assert_valid(&v);
    let nodes = v["spatial"]["nodes"].as_array().unwrap();
    assert_eq!(nodes.iter().filter(|n| n["level"] == 0).count(), 20);
    assert!(nodes.iter().any(|n| n["chrom"] == "chr2"));
    assert!(v["selections"][0]["tp_lower"].as_u64().unwrap() >= 1);
    assert!(v["provenance"]["input_sha256"]["annotations"].is_string());
}

#[test]
fn simulate_bonferroni() {
    let (v, _) = ok_json(&["simulate", "--method", "bonf", "--m", "50", "--reps", "2000", "--seed", "1"]);
    assert_valid(&v);
    let cov = v["simulation"]["coverage"].as_f64().unwrap();
    assert!((cov - 0.9512).abs() < 0.02, "{cov}");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = worked_file(dir.path());
    let p = p.to_str().unwrap();
    let code = |args: &[&str]| run(args).status.code().unwrap();
    assert_eq!(code(&["bound", "--pvalues", p, "--ids", "g1,zz"]), 2);
    assert_eq!(code(&["bound", "--pvalues", p, "--method", "fisher"]), 2);
    assert_eq!(code(&["bound", "--pvalues", p, "--method", "calibrated"]), 2);
    assert_eq!(code(&["bound", "--pvalues", p, "--select", "x=top:"]), 2);
    assert_eq!(code(&["bound"]), 2);
    assert_eq!(code(&["bound", "--pvalues", p, "--nonsense"]), 2);
    assert_eq!(code(&["bound", "--pvalues", "/definitely/missing.csv"]), 1);

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "id,p\na,0.1\nb,1.5\n").unwrap();
    let out = run(&["bound", "--pvalues", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = worked_file(dir.path());
    let out = dir.path().join("r.json");
    let res = run(&["bound", "--pvalues", p.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(res.status.success());
    assert!(res.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(v["selections"][0]["name"], "all");
}
